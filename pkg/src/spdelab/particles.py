"""N-particle system: sampling, Euler-Maruyama stepping, deposition, smoothing.

Positions live on the torus as an (N, d) array.  Each particle owns a
deterministic noise stream (see rng.py); the environmental path is a single
shared BrownianPaths object.  The empirical measure is deposited on the
grid with cloud-in-cell weights (exactly mass conserving, partition of
unity) and smoothed by the mollifier multiplier, giving the regularized
density the convergence experiments compare against the field solution.
"""
from dataclasses import dataclass
from typing import Optional

import hashlib

import numpy as np

from . import rng
from .drift import eval_drift
from .errors import IntegrationError
from .mollifier import deposition_multiplier
from .torus import FieldState, wrap


@dataclass(frozen=True)
class NoiseModel:
    """Constant-in-space diffusion data: identity idiosyncratic scaling and a
    d x d environmental matrix sigma (optionally piecewise constant in time)."""

    d: int
    sigma: np.ndarray
    schedule: Optional[tuple] = None  # ((t_start, matrix), ...) sorted by t_start

    @classmethod
    def make(cls, d, sigma, schedule=None):
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim == 0:
            sigma = float(sigma) * np.eye(d)
        if sigma.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d} or scalar, got {sigma.shape}")
        if schedule is not None:
            schedule = tuple(
                (float(t), np.asarray(m, dtype=float).reshape(d, d)) for t, m in schedule
            )
        return cls(d=d, sigma=sigma, schedule=schedule)

    def sigma_at(self, t):
        if self.schedule is None:
            return self.sigma
        current = self.sigma
        for t_start, mat in self.schedule:
            if t >= t_start:
                current = mat
        return current


@dataclass(frozen=True)
class BrownianPaths:
    """Environmental increments on the step grid t_j = j dt, generated once
    per replica at the finest resolution any consumer needs."""

    dt: float
    increments: np.ndarray  # (J, d)

    @classmethod
    def generate(cls, master_seed, replica, n_steps, dt, d):
        g = rng.common_noise_stream(master_seed, replica)
        inc = g.normal(0.0, np.sqrt(dt), size=(n_steps, d))
        inc.flags.writeable = False
        return cls(dt=float(dt), increments=inc)

    @property
    def n_steps(self):
        return self.increments.shape[0]

    @property
    def d(self):
        return self.increments.shape[1]

    def coarsen(self, factor):
        """Pairwise-sum increments into steps of size factor*dt (exact)."""
        if factor == 1:
            return self
        if self.n_steps % factor != 0:
            raise ValueError(f"cannot coarsen {self.n_steps} steps by {factor}")
        inc = self.increments.reshape(self.n_steps // factor, factor, self.d).sum(axis=1)
        inc.flags.writeable = False
        return BrownianPaths(dt=self.dt * factor, increments=inc)

    def path_hash(self):
        return hashlib.sha256(np.ascontiguousarray(self.increments).tobytes()).hexdigest()[:16]


class ParticleEnsemble:
    """Positions plus per-particle noise streams.

    Stream derivation is pure in (master_seed, replica, index), so two runs
    that share those keys consume identical idiosyncratic noise for the
    particles they have in common, whatever their ensemble sizes.
    """

    def __init__(self, positions, streams):
        positions = np.asarray(positions, dtype=float)
        if positions.ndim != 2:
            raise ValueError("positions must be (N, d)")
        if len(streams) != positions.shape[0]:
            raise ValueError("one stream per particle required")
        self.positions = wrap(positions)
        self.streams = streams

    @property
    def N(self):
        return self.positions.shape[0]

    @property
    def d(self):
        return self.positions.shape[1]

    @classmethod
    def sample(cls, density_fn, density_sup, d, N, master_seed, replica):
        """Draw N i.i.d. initial positions from a density on the torus.

        d=1 inverts the CDF on a fine grid; d>=2 uses rejection against the
        supplied sup bound.  Each particle spends only its own stream.
        """
        streams = rng.particle_streams(master_seed, replica, N)
        if d == 1:
            xs = np.linspace(-0.5, 0.5, 1 << 16 | 1)
            dens = np.maximum(np.asarray(density_fn(xs[:, None]), dtype=float).reshape(-1), 0.0)
            cdf = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))))
            cdf /= cdf[-1]
            u = np.array([g.uniform() for g in streams])
            positions = np.interp(u, cdf, xs)[:, None]
        else:
            positions = np.empty((N, d))
            for i, g in enumerate(streams):
                while True:
                    # batch a few candidates to amortize generator calls
                    cand = g.uniform(-0.5, 0.5, size=(8, d))
                    height = g.uniform(0.0, density_sup, size=8)
                    vals = np.asarray(density_fn(cand), dtype=float).reshape(-1)
                    hit = np.nonzero(height <= vals)[0]
                    if hit.size:
                        positions[i] = cand[hit[0]]
                        break
        return cls(wrap(positions), streams)

    @classmethod
    def at_positions(cls, positions, master_seed=0, replica=0):
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        streams = rng.particle_streams(master_seed, replica, positions.shape[0])
        return cls(positions, streams)

    def draw_increments(self, n_steps, dt):
        """Idiosyncratic N(0, dt I) increments, shape (n_steps, N, d)."""
        out = np.empty((n_steps, self.N, self.d))
        root = np.sqrt(dt)
        for i, g in enumerate(self.streams):
            out[:, i, :] = g.normal(0.0, root, size=(n_steps, self.d))
        return out

    def with_positions(self, positions):
        return ParticleEnsemble(positions, self.streams)


def _cic_indices(positions, grid):
    """Lower-corner indices and fractional offsets of each particle."""
    u = (positions + 0.5) / grid.h
    base = np.floor(u)
    frac = u - base
    return base.astype(np.int64) % grid.M, frac


def _corner_weights(frac):
    """Weights of the 2^d surrounding nodes (linear per axis)."""
    n, d = frac.shape
    weights = []
    offsets = []
    for corner in range(1 << d):
        bits = [(corner >> a) & 1 for a in range(d)]
        w = np.ones(n)
        for a, b in enumerate(bits):
            w = w * (frac[:, a] if b else 1.0 - frac[:, a])
        weights.append(w)
        offsets.append(bits)
    return offsets, weights


def deposit(ens, grid):
    """Cloud-in-cell deposition of the empirical measure onto the grid.

    Each particle spreads mass 1/(N h^d) over its 2^d surrounding nodes, so
    the quadrature mass is 1 up to rounding.
    """
    if ens.d != grid.d:
        raise ValueError("ensemble and grid dimensions differ")
    base, frac = _cic_indices(ens.positions, grid)
    offsets, weights = _corner_weights(frac)
    total = np.zeros(grid.M**grid.d)
    strides = np.array([grid.M**a for a in range(grid.d - 1, -1, -1)])
    scale = 1.0 / (ens.N * grid.cell_volume)
    for bits, w in zip(offsets, weights):
        idx = np.zeros(ens.N, dtype=np.int64)
        for a, b in enumerate(bits):
            idx += ((base[:, a] + b) % grid.M) * strides[a]
        total += np.bincount(idx, weights=w * scale, minlength=total.size)
    return FieldState(grid, total.reshape(grid.shape))


def interpolate(values, positions, grid):
    """Gather grid values at particle positions with the CIC weights."""
    base, frac = _cic_indices(np.atleast_2d(positions), grid)
    offsets, weights = _corner_weights(frac)
    flat = np.ascontiguousarray(values).reshape(-1)
    strides = np.array([grid.M**a for a in range(grid.d - 1, -1, -1)])
    out = np.zeros(base.shape[0])
    for bits, w in zip(offsets, weights):
        idx = np.zeros(base.shape[0], dtype=np.int64)
        for a, b in enumerate(bits):
            idx += ((base[:, a] + b) % grid.M) * strides[a]
        out += flat[idx] * w
    return out


def mollify(sn, moll, N):
    """Smooth a deposited empirical measure into the regularized density.

    Spectral product with the unit-zero-mode bump multiplier, so mass is
    preserved exactly; tiny FFT undershoot is clipped to zero and the
    clipped mass recorded on the returned field (attribute clip_mass).
    """
    grid = sn.grid
    vmult, _ = deposition_multiplier(moll, N, grid)
    values = grid.irfftn(sn.rhat * vmult)
    neg = np.minimum(values, 0.0)
    clip_mass = float(-np.sum(neg) * grid.cell_volume)
    out = FieldState(grid, np.maximum(values, 0.0))
    out.clip_mass = clip_mass
    out.min_value = float(np.min(values))
    return out


def interaction_force(ens, rhoN, kernel, drift_spec):
    """Per-particle velocities: smooth-field convolution evaluated at the
    particles, then passed through the drift.

    Returns (forces, raw) where raw is the uncut kernel output the cutoff
    monitor watches.
    """
    grid = rhoN.grid
    symbols = kernel.symbol_grid(grid)
    raw = np.empty((ens.N, len(symbols)))
    for c, s in enumerate(symbols):
        comp = grid.irfftn(rhoN.rhat * s)
        raw[:, c] = interpolate(comp, ens.positions, grid)
    forces = eval_drift(drift_spec, ens.positions, raw)
    return forces, raw


def em_step(ens, drift_eval, noise, dW, dB, dt, t=0.0):
    """One Euler-Maruyama update: drift dt + own noise + shared noise.

    Every particle receives the same environmental increment dB; dW holds
    the per-particle draws for this step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    drift_eval = np.asarray(drift_eval, dtype=float)
    if not np.all(np.isfinite(drift_eval)):
        bad = int(np.argwhere(~np.isfinite(drift_eval))[0][0])
        raise IntegrationError(f"non-finite drift for particle {bad}")
    sigma = noise.sigma_at(t)
    shift = sigma @ np.asarray(dB, dtype=float)
    return ens.with_positions(wrap(ens.positions + drift_eval * dt + dW + shift))


def pairwise_forces_reference(ens, gn_fields, drift_spec):
    """O(N^2) cross-check of interaction_force using the gridded smooth kernel.

    Sums the smoothed kernel over all ordered pairs (self-pairs included,
    exactly as the convolution identity does) by interpolating the gridded
    fields at the wrapped pair separations.  Intended for N <= ~512.
    """
    grid = gn_fields[0].grid
    diffs = wrap(ens.positions[:, None, :] - ens.positions[None, :, :]).reshape(-1, ens.d)
    raw = np.empty((ens.N, len(gn_fields)))
    for c, f in enumerate(gn_fields):
        vals = interpolate(f.values, diffs, grid).reshape(ens.N, ens.N)
        raw[:, c] = vals.mean(axis=1)
    return eval_drift(drift_spec, ens.positions, raw), raw


class CutoffMonitor:
    """Watches the uncut kernel output against a threshold A.

    ok latches to False the first time any particle sees |u| > A and stays
    False; the peak magnitude and the peak ratio to a running field norm are
    kept for the inclusion accounting.
    """

    def __init__(self, A):
        self.A = float(A) if A is not None else None
        self.ok = True
        self.max_abs = 0.0
        self.max_ratio = 0.0

    def update(self, raw, field_norm=None):
        m = float(np.max(np.linalg.norm(np.atleast_2d(raw), axis=1)))
        self.max_abs = max(self.max_abs, m)
        if field_norm is not None and field_norm > 0:
            self.max_ratio = max(self.max_ratio, m / field_norm)
        if self.A is not None and m > self.A:
            self.ok = False
        return self.ok
