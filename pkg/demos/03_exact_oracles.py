"""Two closed-form anchors for the field solver.

1. Drift-free runs: diffusion plus shared-noise transport composes into
   "heat flow, then translate by the accumulated shift" -- exactly, because
   both substeps are exact multipliers.  The solver must match to rounding.
2. The deterministic d=1 pointwise-interaction run has a heat-kernel
   quotient solution (doubling the density turns the equation into the
   standard viscous conservation law); the splitting error against it
   shrinks by 4x per step halving.
"""
import numpy as np

from spdelab import FieldState, PeriodicGrid, Solver, heat_then_translate, lq_norm
from spdelab.drift import DriftSpec
from spdelab.kernels import dirac
from spdelab.particles import BrownianPaths, NoiseModel

grid = PeriodicGrid(d=1, M=256)
rho0 = FieldState(grid, 1.0 + 0.5 * np.cos(2 * np.pi * grid.axis_nodes))
T, J = 0.5, 2048

# --- oracle 1: translation identity ------------------------------------------
paths = BrownianPaths.generate(2024, 0, J, T / J, 1)
solver = Solver(grid, None, DriftSpec.identity(), NoiseModel.make(1, 0.7), T / J)
res = solver.solve(rho0, paths, snapshot_every=J)
shift = 0.7 * np.sum(paths.increments, axis=0)
exact = heat_then_translate(rho0, shift, T)
err = lq_norm(FieldState(grid, res.fields[-1].values - exact.values), 2)
print(f"drift-free solver vs heat-then-translate: L2 error {err:.2e}")

# --- oracle 2: heat-kernel quotient for the deterministic d=1 run -------------
def reference(x, t, nu=0.5, n_quad=4096, images=8):
    c, hf = 2.0, 1.0 / n_quad
    y = -0.5 + np.arange(n_quad) * hf
    phi0 = np.exp(-np.sin(2 * np.pi * y) / (2 * np.pi) / (2 * nu))
    var = 2 * nu * t
    z = (x - c * t)[:, None] - y[None, :]
    G = np.zeros_like(z)
    Gx = np.zeros_like(z)
    for n in range(-images, images + 1):
        w = z + n
        g = np.exp(-w * w / (2 * var)) / np.sqrt(2 * np.pi * var)
        G += g
        Gx += g * (-w / var)
    v = -2 * nu * (Gx @ phi0) / (G @ phi0)
    return (c + v) / 2.0

ref = reference(grid.axis_nodes, T)
print("\nsplitting error against the closed form (deterministic, d=1):")
prev = None
for J in (512, 1024, 2048, 4096):
    solver = Solver(grid, dirac(d=1), DriftSpec.identity(), NoiseModel.make(1, 0.0), T / J)
    flat = BrownianPaths(dt=T / J, increments=np.zeros((J, 1)))
    out = solver.solve(rho0, flat, snapshot_every=J).fields[-1].values
    err = np.sqrt(np.sum((out - ref) ** 2) / 256) / np.sqrt(np.sum(ref**2) / 256)
    note = "" if prev is None else f"  (ratio {prev / err:.2f})"
    print(f"  steps {J:5d}: rel L2 error {err:.3e}{note}")
    prev = err
