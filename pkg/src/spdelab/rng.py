"""Deterministic stream derivation on top of the counter-based Philox engine.

Every consumer of randomness gets its own generator, keyed purely by
(master_seed, replica, role, index) through SeedSequence spawn keys.  The
derivation is a pure function: the same key always yields the same stream,
no matter how many other streams exist or in which order they are created.
That is what makes runs with different ensemble sizes consume bit-identical
noise for the particles (and the common path) they share.
"""
import numpy as np

# role tags inside a replica's key space
_PARTICLE = 0
_COMMON = 1
_BOOTSTRAP = 2


def _generator(master_seed, spawn_key):
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(spawn_key))
    return np.random.Generator(np.random.Philox(ss))


def particle_stream(master_seed, replica, index):
    """Stream owned by one particle: initial position draw, then increments."""
    return _generator(master_seed, (replica, _PARTICLE, index))


def particle_streams(master_seed, replica, n):
    return [particle_stream(master_seed, replica, i) for i in range(n)]


def common_noise_stream(master_seed, replica):
    """Stream of the environmental path shared by every coupled consumer."""
    return _generator(master_seed, (replica, _COMMON))


def bootstrap_stream(master_seed):
    """Fixed sub-seed for resampling, independent of all simulation streams."""
    return _generator(master_seed, (0, _BOOTSTRAP))
