"""Singular interaction kernels as Fourier multipliers.

Every kernel is described by its symbol on integer frequencies, acting on
coefficients in the e^{2 pi i k.x} convention used throughout (this is the
one place where the 2 pi bookkeeping between that convention and the
classical kernel series is pinned down).  The zero mode is 0 for every
kernel except the identity convolution, so constant backgrounds produce no
velocity.  Smoothing metadata (holder_gamma, C_K, q) travels with the
kernel: the bound ||K * f||_{C^gamma} <= C_K ||f||_q is what the admissible
parameter windows are computed from, and a grid-calibrated C_K is what the
cutoff level is built on.
"""
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .torus import FieldState


def biot_savart_symbol(k):
    """Divergence-free vortex symbol (i/2pi) k_perp / |k|^2, k_perp = (-k2, k1)."""
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != 2:
        raise ValueError("biot_savart_symbol is two-dimensional")
    ksq = np.sum(k * k, axis=-1)
    if np.any(ksq == 0):
        raise ValueError("zero frequency has no vortex symbol (handled as zero mode)")
    out = np.empty(k.shape, dtype=complex)
    out[..., 0] = -k[..., 1]
    out[..., 1] = k[..., 0]
    return (1j / (2.0 * np.pi)) * out / ksq[..., None]


def keller_segel_symbol(k, chi):
    """Curl-free aggregation symbol -chi i k / (2 pi |k|^2).

    Spectral realization of -chi grad G with G the zero-mean Green's
    function of -Laplace on the torus; exact on the grid, no lattice sums.
    """
    k = np.asarray(k, dtype=float)
    ksq = np.sum(k * k, axis=-1)
    if np.any(ksq == 0):
        raise ValueError("zero frequency has no gradient symbol (handled as zero mode)")
    return -chi * 1j * k / (2.0 * np.pi * ksq[..., None])


def dirac_symbol(k):
    """Identity convolution: 1 on every mode, the zero mode included."""
    k = np.asarray(k)
    return np.ones(k.shape[:-1] if k.ndim > 1 else k.shape, dtype=complex)


@dataclass(frozen=True)
class KernelSpec:
    """A named multiplier with smoothing metadata.

    symbol_fn maps an (..., d) array of nonzero integer frequencies to an
    (..., components) complex array.  zero_mode is the value on k = 0
    (nonzero only for the identity convolution).
    """

    kind: str
    d: int
    components: int
    symbol_fn: Callable
    zero_mode: complex = 0.0
    holder_gamma: Optional[float] = None
    c_k: Optional[float] = None
    q: Optional[float] = None

    def with_calibration(self, c_k):
        return replace(self, c_k=float(c_k))

    def symbol_grid(self, grid):
        """Multiplier arrays on the grid's rfft layout, one per component.

        Memoized per grid: runs multiply by these arrays every step.
        """
        cache = getattr(self, "_symbol_cache", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_symbol_cache", cache)
        if grid in cache:
            return cache[grid]
        if grid.d != self.d:
            raise ValueError(f"kernel is {self.d}-dimensional, grid is {grid.d}")
        kvec = np.stack(grid.freqs, axis=-1)
        flat = kvec.reshape(-1, grid.d)
        nonzero = np.any(flat != 0, axis=1)
        out = np.full(
            (flat.shape[0], self.components), complex(self.zero_mode), dtype=complex
        )
        if np.any(nonzero):
            vals = self.symbol_fn(flat[nonzero])
            out[nonzero] = vals.reshape(-1, self.components)
        comps = []
        for c in range(self.components):
            arr = out[:, c].reshape(grid.rfft_shape)
            arr.flags.writeable = False
            comps.append(arr)
        cache[grid] = comps
        return comps


def biot_savart_2d(q=4.0, c_k=None):
    """Vorticity-to-velocity kernel; Hoelder exponent 1 - 2/q for f in L^q."""
    if q <= 2:
        raise ValueError("biot-savart smoothing metadata needs q > 2")
    return KernelSpec(
        kind="biot_savart",
        d=2,
        components=2,
        symbol_fn=biot_savart_symbol,
        zero_mode=0.0,
        holder_gamma=1.0 - 2.0 / q,
        c_k=c_k,
        q=q,
    )


def keller_segel(chi, d=2, q=4.0, c_k=None):
    """Chemotactic drift kernel; Hoelder exponent 1 - d/q for f in L^q."""
    if chi < 0:
        raise ValueError("chi must be nonnegative")
    if q <= d:
        raise ValueError("keller-segel smoothing metadata needs q > d")
    return KernelSpec(
        kind="keller_segel",
        d=d,
        components=d,
        symbol_fn=lambda k: keller_segel_symbol(k, chi),
        zero_mode=0.0,
        holder_gamma=1.0 - d / q,
        c_k=c_k,
        q=q,
    )


def dirac(d=1):
    """Identity convolution (pointwise density interaction)."""
    return KernelSpec(
        kind="dirac",
        d=d,
        components=1,
        symbol_fn=dirac_symbol,
        zero_mode=1.0,
    )


def custom_multiplier(table, d, holder_gamma, c_k, q):
    """Kernel from an explicit mode table {k tuple: complex vector}.

    Modes absent from the table are zero.  Smoothing metadata is mandatory:
    admissibility windows cannot be derived from a bare table.
    """
    if holder_gamma is None or c_k is None or q is None:
        raise ValueError("custom multipliers require (holder_gamma, c_k, q) metadata")
    table = {tuple(int(x) for x in k): np.asarray(v, dtype=complex) for k, v in table.items()}
    components = len(next(iter(table.values()))) if table else d

    def symbol_fn(ks):
        ks = np.atleast_2d(np.asarray(ks, dtype=int))
        out = np.zeros((ks.shape[0], components), dtype=complex)
        for i, k in enumerate(ks):
            v = table.get(tuple(k))
            if v is not None:
                out[i] = v
        return out

    return KernelSpec(
        kind="custom",
        d=d,
        components=components,
        symbol_fn=symbol_fn,
        zero_mode=0.0,
        holder_gamma=holder_gamma,
        c_k=c_k,
        q=q,
    )


def load_multiplier_table(path, d):
    """Parse a whitespace table  k_1 .. k_d  re_1 im_1 .. re_c im_c  per row."""
    table = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) <= d or (len(parts) - d) % 2 != 0:
                raise ValueError(f"{path}:{line_no}: need k_1..k_{d} plus re/im pairs")
            k = tuple(int(float(p)) for p in parts[:d])
            vals = [float(p) for p in parts[d:]]
            table[k] = np.array(
                [complex(re, im) for re, im in zip(vals[::2], vals[1::2])]
            )
    return table


def apply_kernel(spec, f, monitor=None):
    """Convolve a field with the kernel: one output FieldState per component.

    When `monitor` is given and the kernel carries calibrated metadata, the
    observed sup|K*f| / ||f||_q ratio is reported to it (the smoothing bound
    is monitored at grid level, never enforced).
    """
    grid = f.grid
    symbols = spec.symbol_grid(grid)
    outs = [FieldState.from_rfft(grid, s * f.rhat) for s in symbols]
    if monitor is not None and spec.q is not None:
        from .torus import lq_norm

        sup = max(np.max(np.abs(o.values)) for o in outs)
        denom = lq_norm(f, spec.q)
        monitor(sup / denom if denom > 0 else 0.0)
    return outs


def mollified_kernel(spec, moll, N, grid):
    """Grid fields of the smoothed kernel (K * V_N), one per component.

    Computed as symbol x transform of the sampled bump, so the identity
    convolution returns exactly the grid sampling of V_N.
    """
    from .mollifier import grid_samples

    samples = grid_samples(moll, N, grid, layout="offset")
    vhat = grid.rfftn(samples)
    symbols = spec.symbol_grid(grid)
    shift = (grid.M // 2,) * grid.d
    outs = []
    for s in symbols:
        offset_vals = grid.irfftn(s * vhat)
        outs.append(FieldState(grid, np.roll(offset_vals, shift, axis=tuple(range(grid.d)))))
    return outs


def divergence_residual(spec, grid):
    """L2 norm of k . symbol(k) over the grid modes (zero for vortex kernels)."""
    symbols = spec.symbol_grid(grid)
    if len(symbols) != grid.d:
        raise ValueError("divergence is defined for d-component kernels")
    acc = np.zeros(grid.rfft_shape, dtype=complex)
    for k, s in zip(grid.freqs, symbols):
        acc += k * s
    return float(np.sqrt(np.sum(np.abs(acc) ** 2)))


def grid_dual_constant(spec, grid, q):
    """Exact grid bound: sup_x |(K * f)(x)| <= C ||f||_q for every grid field.

    The convolution at a node is a weighted sum of f against the real-space
    grid kernel, so Hoelder against the quadrature measure gives
    C = || |K_grid| ||_{q'} with 1/q + 1/q' = 1 (the Euclidean magnitude for
    vector kernels).  Sharp for scalar kernels, a valid upper bound always;
    this is the constant the saturation level is sized with, because the
    saturation-event accounting needs a bound that holds for the rough
    smoothed-empirical fields, not just calibration samples.
    """
    if q <= 1:
        raise ValueError("dual constant needs q > 1")
    symbols = spec.symbol_grid(grid)
    mag_sq = np.zeros(grid.shape)
    for s in symbols:
        real = grid.irfftn(np.asarray(s))
        mag_sq += real * real
    q_dual = q / (q - 1.0)
    # kernel values on the quadrature measure are s / h^d
    mag = np.sqrt(mag_sq) / grid.cell_volume
    return float(np.sum(mag**q_dual) * grid.cell_volume) ** (1.0 / q_dual)


def calibrate_holder_constant(spec, grid, trials=100, seed=0, band=None):
    """Grid estimate of C_K: max of sup|K*f| / ||f||_q over random band-limited f.

    Returns the observed maximum ratio; callers typically apply their own
    safety factor before using it to size cutoff levels.
    """
    if spec.q is None:
        raise ValueError("kernel has no q metadata to calibrate against")
    from .torus import lq_norm

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    band = band if band is not None else grid.M // 3
    worst = 0.0
    for _ in range(trials):
        rhat = np.zeros(grid.rfft_shape, dtype=complex)
        mask = np.ones(grid.rfft_shape, dtype=bool)
        for k in grid.freqs:
            mask &= np.abs(k) <= band
        n = int(np.sum(mask))
        rhat[mask] = rng.normal(size=n) + 1j * rng.normal(size=n)
        rhat.flat[0] = abs(rhat.flat[0])
        f = FieldState.from_rfft(grid, rhat)
        denom = lq_norm(f, spec.q)
        if denom == 0:
            continue
        outs = apply_kernel(spec, f)
        sup = max(np.max(np.abs(o.values)) for o in outs)
        worst = max(worst, sup / denom)
    return worst
