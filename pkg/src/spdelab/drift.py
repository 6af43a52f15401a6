"""Drift nonlinearities: identity, C^2 saturating cutoff, custom Lipschitz maps.

The cutoff clamp_A is odd, equals the identity on [-A, A], saturates at
+-A beyond |x| = A + 1, and blends in between with

    phi(s) = s (1 + 3 s) (1 - s)^3,   s in [0, 1],

the lowest-degree polynomial with phi(0)=0, phi'(0)=1, phi''(0)=0 and a
triple zero at s=1.  That makes the clamp globally C^2 with |clamp'| <= 1
and sup |clamp_A| = A + 16/81 <= A + 1.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


def _blend(s):
    return s * (1.0 + 3.0 * s) * (1.0 - s) ** 3


def eval_fA(A, x):
    """Scalar C^2 cutoff: identity on [-A, A], +-A past |x| = A + 1."""
    if A <= 0:
        raise ValueError("cutoff level A must be positive")
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    out = np.where(ax <= A, ax, np.where(ax >= A + 1.0, A, A + _blend(np.minimum(ax - A, 1.0))))
    return np.sign(x) * out if out.ndim else float(np.sign(x) * out)


def eval_FA(A, v):
    """Componentwise cutoff of a vector."""
    return eval_fA(A, np.asarray(v, dtype=float))


@dataclass(frozen=True)
class DriftSpec:
    """Drift F(x, u): how the kernel output u turns into a velocity."""

    kind: str  # "identity" | "cutoff" | "custom"
    A: Optional[float] = None
    lipschitz: Optional[float] = None
    bound: float = np.inf
    fn: Optional[Callable] = None

    @classmethod
    def identity(cls):
        return cls(kind="identity", lipschitz=1.0, bound=np.inf)

    @classmethod
    def cutoff(cls, A):
        if A <= 0:
            raise ValueError("cutoff level A must be positive")
        return cls(kind="cutoff", A=float(A), lipschitz=1.0, bound=float(A) + 1.0)

    @classmethod
    def custom(cls, fn, lipschitz, bound=np.inf):
        return cls(kind="custom", fn=fn, lipschitz=float(lipschitz), bound=float(bound))


def check_lipschitz_sample(spec, d=1, n_pairs=200, seed=0):
    """Sampled Lipschitz sanity for custom drifts.

    Draws random (x, u) pairs on the torus times a bounded value range and
    returns the largest observed ratio |F(x,u) - F(y,v)| / (|x-y| + |u-v|).
    A return above spec.lipschitz means the declared constant is wrong.
    """
    if spec.fn is None:
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.5, 0.5, size=(n_pairs, d))
    y = rng.uniform(-0.5, 0.5, size=(n_pairs, d))
    u = rng.uniform(-3.0, 3.0, size=(n_pairs, d))
    v = rng.uniform(-3.0, 3.0, size=(n_pairs, d))
    fu = np.asarray(spec.fn(x, u), dtype=float)
    fv = np.asarray(spec.fn(y, v), dtype=float)
    num = np.linalg.norm(fu - fv, axis=-1)
    den = np.linalg.norm(x - y, axis=-1) + np.linalg.norm(u - v, axis=-1)
    mask = den > 1e-12
    return float(np.max(num[mask] / den[mask])) if np.any(mask) else 0.0


def eval_drift(spec, x, u):
    """Velocity from positions x and kernel output u (same trailing shape)."""
    u = np.asarray(u, dtype=float)
    if spec.kind == "identity":
        return u
    if spec.kind == "cutoff":
        return eval_FA(spec.A, u)
    if spec.kind == "custom":
        out = np.asarray(spec.fn(x, u), dtype=float)
        if out.shape != u.shape:
            raise ValueError(
                f"custom drift returned shape {out.shape}, expected {u.shape}"
            )
        return out
    raise ValueError(f"unknown drift kind {spec.kind!r}")
