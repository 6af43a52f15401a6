"""Periodic torus substrate: wrapping, grids, transforms, and L^q norms.

The domain is the unit torus [-1/2, 1/2)^d.  Real fields live on a uniform
M^d grid with nodes g(j) = -1/2 + j/M and are paired with their discrete
Fourier coefficients in the convention

    f(x) = sum_k  c_k  exp(2*pi*i k.x),   k integer frequencies,

so the zero mode is the quadrature mean and the Laplacian symbol is
-(2*pi*|k|)^2.  Integrals are rectangle-rule sums with weight h^d, which is
exact for the trigonometric interpolants the solvers work with.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np


def wrap(x):
    """Map raw coordinates to the fundamental cell [-1/2, 1/2).

    Uses x - round(x) with round-half-up so 0.5 wraps to -0.5; already
    wrapped input is returned bitwise unchanged.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot wrap non-finite coordinates")
    return x - np.floor(x + 0.5)


def torus_distance(x, y):
    """Geodesic distance on the torus, coordinates wrapped per axis."""
    delta = wrap(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    return np.sqrt(np.sum(delta * delta, axis=-1))


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform M^d grid on the torus; M must be a power of two."""

    d: int
    M: int

    def __post_init__(self):
        if self.d < 1 or self.d > 3:
            raise ValueError(f"dimension {self.d} unsupported (need 1 <= d <= 3)")
        if self.M < 2 or (self.M & (self.M - 1)) != 0:
            raise ValueError(f"points per axis must be a power of two, got {self.M}")

    @property
    def h(self):
        return 1.0 / self.M

    @property
    def shape(self):
        return (self.M,) * self.d

    @property
    def cell_volume(self):
        return self.h**self.d

    @cached_property
    def axis_nodes(self):
        return -0.5 + np.arange(self.M) * self.h

    def coords(self):
        """d arrays of node coordinates, meshgrid 'ij' layout."""
        return np.meshgrid(*([self.axis_nodes] * self.d), indexing="ij")

    @cached_property
    def offsets(self):
        """Node offsets wrap(m*h) per axis, the natural layout for kernels
        sampled as functions of the separation vector."""
        return wrap(np.arange(self.M) * self.h)

    def offset_coords(self):
        return np.meshgrid(*([self.offsets] * self.d), indexing="ij")

    @cached_property
    def rfft_shape(self):
        return (self.M,) * (self.d - 1) + (self.M // 2 + 1,)

    @cached_property
    def freqs(self):
        """Integer frequencies per axis, broadcastable to rfft layout."""
        full = np.fft.fftfreq(self.M, d=self.h)
        half = np.fft.rfftfreq(self.M, d=self.h)
        axes = [full] * (self.d - 1) + [half]
        return np.meshgrid(*axes, indexing="ij")

    @cached_property
    def ksq(self):
        return sum(k * k for k in self.freqs)

    @cached_property
    def dealias_mask(self):
        """2/3-rule mask: keep |k_i| <= M/3 on every axis."""
        cut = self.M / 3.0
        mask = np.ones(self.rfft_shape, dtype=bool)
        for k in self.freqs:
            mask &= np.abs(k) <= cut
        return mask

    def rfftn(self, values):
        return np.fft.rfftn(values, axes=tuple(range(self.d)))

    def irfftn(self, rhat):
        return np.fft.irfftn(rhat, s=self.shape, axes=tuple(range(self.d)))


class FieldState:
    """A real field on a PeriodicGrid with a lazily cached transform.

    Instances are effectively immutable: `values` is a read-only view and
    all operations return new fields, so snapshots can be shared freely.
    """

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        values = values.copy()
        values.flags.writeable = False
        self.grid = grid
        self._values = values
        self._rhat = None

    @classmethod
    def from_rfft(cls, grid, rhat):
        f = cls(grid, grid.irfftn(rhat))
        return f

    @property
    def values(self):
        return self._values

    @property
    def rhat(self):
        """Raw numpy rfftn of the node values (layout-convention transform)."""
        if self._rhat is None:
            self._rhat = self.grid.rfftn(self._values)
            self._rhat.flags.writeable = False
        return self._rhat

    def coeffs(self):
        """Full complex coefficient array c_k in the e^{2 pi i k.x} convention.

        The half-cell node offset contributes a (-1)^k phase per axis
        relative to the raw FFT of the node values.
        """
        g = self.grid
        fhat = np.fft.fftn(self._values) / self.M_total
        full = np.fft.fftfreq(g.M, d=g.h)
        for axis in range(g.d):
            shape = [1] * g.d
            shape[axis] = g.M
            phase = np.where(np.rint(full).astype(int) % 2 == 0, 1.0, -1.0)
            fhat = fhat * phase.reshape(shape)
        return fhat

    def coefficient(self, k):
        """Single coefficient c_k for an integer frequency tuple."""
        k = np.atleast_1d(np.asarray(k, dtype=int))
        if k.size != self.grid.d:
            raise ValueError("frequency dimension mismatch")
        idx = tuple(int(ki) % self.grid.M for ki in k)
        return self.coeffs()[idx]

    @property
    def M_total(self):
        return self.grid.M**self.grid.d

    def quadrature(self):
        """Rectangle-rule integral over the torus."""
        return float(np.sum(self._values) * self.grid.cell_volume)


def quadrature(field):
    return field.quadrature()


def lq_norm(f, q):
    """L^q norm by rectangle-rule quadrature; q >= 1 or inf."""
    values = f.values if isinstance(f, FieldState) else np.asarray(f)
    if np.isinf(q):
        return float(np.max(np.abs(values)))
    if q < 1:
        raise ValueError(f"L^q norm requires q >= 1, got {q}")
    cell = f.grid.cell_volume if isinstance(f, FieldState) else 1.0 / values.size
    return float(np.sum(np.abs(values) ** q) * cell) ** (1.0 / q)


def roundtrip_error(f):
    """Relative max error of values -> transform -> values."""
    back = f.grid.irfftn(f.rhat)
    scale = max(np.max(np.abs(f.values)), 1e-300)
    return float(np.max(np.abs(back - f.values)) / scale)
