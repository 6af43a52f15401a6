"""Torus substrate and the rescaled interaction bump.

Walks through the geometric conventions (fundamental cell, wrapping,
spectral representation) and shows the exact-by-change-of-variables scaling
law of the bump's gradient norms that everything downstream leans on.
"""
import numpy as np

from spdelab import FieldState, MollifierSpec, PeriodicGrid, eval_VN, lq_norm, wrap
from spdelab.mollifier import vn_gradient_norm_q

# --- wrapping: the fundamental cell is [-1/2, 1/2) ---------------------------
print("wrap examples:", wrap([0.75, -1.3, 2.5]))

# --- fields pair node values with spectral coefficients ----------------------
grid = PeriodicGrid(d=1, M=256)
f = FieldState(grid, 1.0 + np.cos(2 * np.pi * grid.axis_nodes))
print("zero mode (mass):", f.coefficient([0]).real)
print("cosine mode:     ", f.coefficient([1]).real, "(expect 0.5)")
print("L2 norm:         ", lq_norm(f, 2), "(expect sqrt(3/2) = %.6f)" % np.sqrt(1.5))

# --- the bump sharpens with N while keeping unit mass ------------------------
moll = MollifierSpec(d=1, beta=0.25)
for N in (1, 16, 256, 4096):
    peak = eval_VN(moll, N, np.array(0.0))
    radius = moll.support_radius(N)
    print(f"N={N:5d}: peak {peak:8.3f}, support radius {radius:.4f}")

# --- gradient norms follow an exact power of N -------------------------------
# ||grad V_N||_q^q / ||grad V||_q^q = N^(q beta (1+1/d) - beta)
q, beta = 2, 0.25
moll = MollifierSpec(d=1, beta=beta)
grid = PeriodicGrid(d=1, M=2048)
base = vn_gradient_norm_q(moll, 1, q, grid) ** q
print("\ngradient-norm scaling (d=1, q=2, beta=1/4):")
print("      N     grid ratio       N^(q beta(1+1/d)-beta)")
for N in (64, 256, 1024):
    got = vn_gradient_norm_q(moll, N, q, grid) ** q / base
    predicted = N ** (q * beta * 2 - beta)
    print(f"  {N:5d}   {got:12.4f}   {predicted:12.4f}")
