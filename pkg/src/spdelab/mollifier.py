"""Interaction mollifier: a fixed C^2 radial bump and its N-rescalings.

The profile is V(x) = c_d (1 - (2|x|)^2)^3 on |x| < 1/2 and zero outside:
nonnegative, unit mass, compactly supported inside the half-unit ball, and
C^2 across the support boundary thanks to the triple zero.  The rescaled
family is

    V_N(x) = N^beta V(N^{beta/d} x),

which keeps unit mass while concentrating toward a point mass as N grows.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .errors import ResolutionError

_SPHERE_FACTOR = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


@lru_cache(maxsize=None)
def normalization_constant(d):
    """c_d with int V = 1; exact in d=1, radial quadrature otherwise."""
    if d == 1:
        return 35.0 / 16.0
    mass, err = quad(
        lambda r: _SPHERE_FACTOR[d] * r ** (d - 1) * (1.0 - 4.0 * r * r) ** 3,
        0.0,
        0.5,
        epsabs=1e-14,
        epsrel=1e-14,
    )
    if err > 1e-12:
        raise RuntimeError(f"normalization quadrature not converged: err={err}")
    return 1.0 / mass


@lru_cache(maxsize=None)
def first_absolute_moment(d):
    """m1 = int V(y) |y| dy; bounds the cost of smearing a point mass."""
    cd = normalization_constant(d)
    val, _ = quad(
        lambda r: _SPHERE_FACTOR[d] * r**d * (1.0 - 4.0 * r * r) ** 3,
        0.0,
        0.5,
        epsabs=1e-14,
        epsrel=1e-14,
    )
    return cd * val


@dataclass(frozen=True)
class MollifierSpec:
    """Bump profile in dimension d with moderation exponent beta in (0,1)."""

    d: int
    beta: float

    def __post_init__(self):
        if self.d not in _SPHERE_FACTOR:
            raise ValueError(f"unsupported dimension {self.d}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0,1), got {self.beta}")

    @property
    def c_d(self):
        return normalization_constant(self.d)

    def scale(self, N):
        """Spatial sharpening factor N^{beta/d}."""
        return float(N) ** (self.beta / self.d)

    def support_radius(self, N):
        """Support of V_N is the ball of radius N^{-beta/d}/2."""
        return 0.5 / self.scale(N)

    def check_resolution(self, grid, N):
        """Require at least 8 cells across the support radius."""
        if grid.h > self.support_radius(N) / 8.0:
            raise ResolutionError(
                f"grid h={grid.h:g} too coarse for N={N}: need h <= "
                f"{self.support_radius(N) / 8.0:g} (support radius / 8)"
            )


def eval_V(spec, x):
    """Base bump at points x (shape (..., d), or bare arrays when d=1)."""
    x = np.asarray(x, dtype=float)
    if spec.d == 1:
        r2 = x * x
    else:
        if x.shape[-1] != spec.d:
            raise ValueError(f"points must have last axis {spec.d}")
        r2 = np.sum(x * x, axis=-1)
    core = np.maximum(1.0 - 4.0 * r2, 0.0)
    return spec.c_d * core**3


def eval_VN(spec, N, x):
    """Rescaled bump N^beta V(N^{beta/d} x); unit mass for every N."""
    if N < 1:
        raise ValueError("N must be a positive integer")
    return float(N) ** spec.beta * eval_V(spec, spec.scale(N) * np.asarray(x, dtype=float))


def grid_samples(spec, N, grid, layout="node"):
    """Sample V_N on the grid.

    layout="node" evaluates at the nodes -1/2 + j h (bump centered mid-grid);
    layout="offset" evaluates at the separation offsets wrap(m h), the layout
    under which FFT products realize grid convolution.
    """
    spec.check_resolution(grid, N)
    if layout == "node":
        axes = [grid.axis_nodes] * grid.d
    elif layout == "offset":
        axes = [grid.offsets] * grid.d
    else:
        raise ValueError(f"unknown layout {layout!r}")
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    if spec.d == 1:
        pts = pts[..., 0]
    return eval_VN(spec, N, pts)


@lru_cache(maxsize=64)
def deposition_multiplier(spec, N, grid):
    """Fourier multiplier of V_N for the deposit->smooth pipeline.

    Normalized so the zero mode is exactly 1: convolving a probability
    density with it preserves unit mass to rounding.  Returns the multiplier
    and the raw grid mass of the sampled bump (its deviation from 1 is the
    sampling quadrature error, worth logging).  Cached: the multiplier is
    reused every step of a run.
    """
    samples = grid_samples(spec, N, grid, layout="offset")
    vhat = grid.rfftn(samples)
    raw_mass = float(vhat.flat[0].real) * grid.cell_volume
    multiplier = vhat / vhat.flat[0].real
    multiplier.flags.writeable = False
    return multiplier, raw_mass


def vn_gradient_norm_q(spec, N, q, grid):
    """(int |grad V_N|^q)^{1/q}, gradient taken spectrally on the grid.

    The exact change of variables gives
    ||grad V_N||_q^q = N^{q beta (1 + 1/d) - beta} ||grad V||_q^q,
    which the test matrix checks against this grid evaluation.
    """
    if q < 2:
        raise ValueError("gradient norms are used with q >= 2")
    spec.check_resolution(grid, N)
    samples = grid_samples(spec, N, grid, layout="offset")
    vhat = grid.rfftn(samples)
    sq = np.zeros(grid.shape)
    for axis in range(grid.d):
        g = grid.irfftn(2j * np.pi * grid.freqs[axis] * vhat)
        sq += g * g
    mag = np.sqrt(sq)
    return float(np.sum(mag**q) * grid.cell_volume) ** (1.0 / q)
