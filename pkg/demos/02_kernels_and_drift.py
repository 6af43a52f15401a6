"""The interaction kernels as Fourier multipliers, and the C^2 saturation.

The vortex kernel turns a scalar field into a divergence-free velocity; the
chemotaxis kernel into a curl-free one; the pointwise kernel is the
identity convolution.  Singular kernels never get evaluated in real space:
their smoothed versions K * V_N are ordinary grid fields.
"""
import numpy as np

from spdelab import (
    FieldState,
    MollifierSpec,
    PeriodicGrid,
    apply_kernel,
    biot_savart_2d,
    dirac,
    eval_fA,
    keller_segel,
    mollified_kernel,
)
from spdelab.kernels import divergence_residual

grid = PeriodicGrid(d=2, M=128)
x1 = grid.coords()[0]
f = FieldState(grid, 1.0 + np.cos(2 * np.pi * x1))

# --- vortex kernel: single-mode response and incompressibility ---------------
u1, u2 = apply_kernel(biot_savart_2d(), f)
print("vortex velocity from cos(2 pi x1):")
print("  component 1 max |.|:", np.max(np.abs(u1.values)), "(expect 0)")
print("  component 2 vs -sin(2 pi x1)/(2 pi): max err",
      np.max(np.abs(u2.values + np.sin(2 * np.pi * x1) / (2 * np.pi))))
print("  divergence residual of the symbol:", divergence_residual(biot_savart_2d(), grid))

# --- chemotaxis kernel: gradient field, zero mean -----------------------------
v1, v2 = apply_kernel(keller_segel(chi=1.0 / (2 * np.pi)), f)
print("chemotaxis drift means:", v1.quadrature(), v2.quadrature(), "(expect 0, 0)")

# --- smoothed kernels are plain fields ----------------------------------------
moll = MollifierSpec(d=2, beta=0.25)
gn = mollified_kernel(biot_savart_2d(), moll, 256, grid)
print("smoothed vortex kernel: sup |G_N| =", max(np.max(np.abs(g.values)) for g in gn))

g1 = PeriodicGrid(d=1, M=512)
moll1 = MollifierSpec(d=1, beta=0.25)
(gn_dirac,) = mollified_kernel(dirac(d=1), moll1, 256, g1)
print("pointwise kernel smoothing returns the bump itself: peak =",
      np.max(gn_dirac.values))

# --- saturation clamp: identity window, C^2 blend, hard cap -------------------
print("\nclamp with level A=1:")
for x in (0.5, 1.0, 1.25, 1.5, 2.0, 3.0):
    print(f"  clamp(1, {x:4.2f}) = {eval_fA(1.0, x):.5f}")
print("sup of clamp =", 1 + 16 / 81, "(= A + 16/81, below A + 1)")
