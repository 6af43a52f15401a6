"""Pseudo-spectral solver for the limiting nonlinear field equation.

The dynamics split into three exactly-representable pieces plus one
explicit one:

  * diffusion (1/2) Lap rho        -> exact heat multiplier,
  * shared-noise transport         -> exact spectral translation by
                                      sigma dB (unitary on every mode; for
                                      constant sigma the Stratonovich
                                      transport is precisely a random
                                      translation, and the translation of
                                      the heat flow generates the Ito
                                      correction on its own),
  * nonlinear transport            -> -div(rho F(K * rho)), integrated with
                                      a two-stage strong-stability
                                      preserving Runge-Kutta step, products
                                      dealiased by the 2/3 rule.

Steps compose by Strang splitting (half diffusion, transport, half
diffusion, translation), second order in dt.  The state stays in Fourier
space between steps, so the zero mode -- the total mass -- is bit-exactly
frozen.
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .drift import eval_drift
from .errors import BlowUpError, StepSizeError, UndershootError
from .torus import FieldState, lq_norm

# validity-window guards
UNDERSHOOT_ABORT = 1e-8      # tolerated pointwise negativity of the state
CLIP_MASS_ABORT = 1e-6       # tolerated negative-part mass per step
BLOWUP_FACTOR = 1e3          # ||rho_t||_q beyond this multiple of ||rho_0||_q aborts
CFL_LIMIT = 0.5


@dataclass
class SolverState:
    """Current transform, physical time, and running diagnostics."""

    rhat: np.ndarray
    t: float
    step_index: int = 0
    min_value: float = np.inf
    max_clip_mass: float = 0.0
    sup_norm_q: float = 0.0
    values_cache: Optional[np.ndarray] = None  # node values as of the last check


@dataclass
class SolveResult:
    times: np.ndarray
    fields: List[FieldState]
    diagnostics: dict


class Solver:
    """One field-equation integrator instance (single-writer; replicas get
    their own instances and share only immutable specs and paths)."""

    def __init__(self, grid, kernel, drift_spec, noise, dt, norm_q=2.0):
        if kernel is not None and kernel.d != grid.d:
            raise ValueError("kernel dimension != grid dimension")
        self.grid = grid
        self.kernel = kernel
        self.drift_spec = drift_spec
        self.noise = noise
        self.dt = float(dt)
        self.norm_q = norm_q
        self._symbols = kernel.symbol_grid(grid) if kernel is not None else None
        self._lap = -((2.0 * np.pi) ** 2) * grid.ksq
        self._heat_half = np.exp(0.5 * self._lap * (self.dt / 2.0))
        self._dealias = grid.dealias_mask
        self._ik = [2j * np.pi * k for k in grid.freqs]
        self._flat_coords = np.stack(grid.coords(), axis=-1).reshape(-1, grid.d)

    # -- substeps ----------------------------------------------------------

    def substep_diffusion(self, state, dt):
        """Exact heat flow over dt: multiplier exp(-(1/2)(2 pi |k|)^2 dt)."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        mult = self._heat_half if dt == self.dt / 2.0 else np.exp(0.5 * self._lap * dt)
        return SolverState(state.rhat * mult, state.t, state.step_index,
                           state.min_value, state.max_clip_mass, state.sup_norm_q)

    def substep_common_noise(self, state, dB):
        """Exact translation by sigma dB: phase factor on every mode."""
        shift = self.noise.sigma_at(state.t) @ np.asarray(dB, dtype=float)
        phase = np.exp(-2j * np.pi * sum(k * s for k, s in zip(self.grid.freqs, shift)))
        return SolverState(state.rhat * phase, state.t, state.step_index,
                           state.min_value, state.max_clip_mass, state.sup_norm_q)

    def _transport_rhs(self, rhat):
        """Spectral -div(rho F(K * rho)) with 2/3-rule dealiasing."""
        g = self.grid
        if self._symbols is None:  # transport disabled (pure diffusion runs)
            return np.zeros(g.rfft_shape, dtype=complex), 0.0
        rh = np.where(self._dealias, rhat, 0.0)
        rho = g.irfftn(rh)
        vel = np.empty(rho.shape + (len(self._symbols),))
        for c, s in enumerate(self._symbols):
            vel[..., c] = g.irfftn(s * rh)
        forced = eval_drift(self.drift_spec, self._flat_coords, vel.reshape(-1, vel.shape[-1]))
        forced = forced.reshape(vel.shape)
        max_f = float(np.max(np.abs(forced))) if forced.size else 0.0
        out = np.zeros(g.rfft_shape, dtype=complex)
        for c in range(self.grid.d):
            fh = g.rfftn(rho * forced[..., c])
            out -= self._ik[c] * np.where(self._dealias, fh, 0.0)
        return out, max_f

    def substep_nonlinear(self, state, dt):
        """Heun (SSP-RK2) update of the transport term; enforces the CFL bound."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        l0, max_f = self._transport_rhs(state.rhat)
        ratio = max_f * dt / self.grid.h
        if ratio > CFL_LIMIT:
            raise StepSizeError(
                f"advective CFL violated at t={state.t:g}: max|F| dt / h = "
                f"{ratio:.3f} > {CFL_LIMIT}"
            )
        mid = state.rhat + dt * l0
        l1, _ = self._transport_rhs(mid)
        new = 0.5 * state.rhat + 0.5 * (mid + dt * l1)
        return SolverState(new, state.t, state.step_index,
                           state.min_value, state.max_clip_mass, state.sup_norm_q)

    # -- full step ---------------------------------------------------------

    def step(self, state, dB):
        """Strang-split step: D/2, transport, D/2, shared-noise translation."""
        s = self.substep_diffusion(state, self.dt / 2.0)
        s = self.substep_nonlinear(s, self.dt)
        s = self.substep_diffusion(s, self.dt / 2.0)
        s = self.substep_common_noise(s, dB)
        s.t = state.t + self.dt
        s.step_index = state.step_index + 1
        return self._check(s)

    def _check(self, state):
        values = self.grid.irfftn(state.rhat)
        mn = float(np.min(values))
        state.min_value = min(state.min_value, mn)
        if mn < -UNDERSHOOT_ABORT:
            raise UndershootError(
                f"field reached {mn:.3e} < -{UNDERSHOOT_ABORT} at t={state.t:g}"
            )
        clip_mass = float(-np.sum(np.minimum(values, 0.0)) * self.grid.cell_volume)
        state.max_clip_mass = max(state.max_clip_mass, clip_mass)
        if clip_mass > CLIP_MASS_ABORT:
            raise UndershootError(
                f"negative-part mass {clip_mass:.3e} > {CLIP_MASS_ABORT} at t={state.t:g}"
            )
        state.sup_norm_q = max(state.sup_norm_q, lq_norm(FieldState(self.grid, values), self.norm_q))
        state.values_cache = values
        return state

    def initial_state(self, rho0):
        rhat = rho0.rhat.copy() if isinstance(rho0, FieldState) else self.grid.rfftn(np.asarray(rho0))
        state = SolverState(rhat=rhat, t=0.0)
        state.values_cache = self.grid.irfftn(rhat)
        return state

    def solve(self, rho0, paths, n_steps=None, snapshot_every=1, callback=None):
        """Integrate and return snapshots every `snapshot_every` steps.

        `callback(step_index, state)` runs after every step; the blow-up
        guard aborts once ||rho_t||_q exceeds BLOWUP_FACTOR times its
        initial value (runs must stay inside the solution's lifespan).
        """
        state = self.initial_state(rho0)
        n_steps = paths.n_steps if n_steps is None else n_steps
        if paths.n_steps < n_steps:
            raise ValueError("paths do not cover the requested horizon")
        if abs(paths.dt - self.dt) > 1e-15 * max(1.0, abs(self.dt)):
            raise ValueError("paths were generated for a different step size")
        rho0_field = FieldState.from_rfft(self.grid, state.rhat)
        norm0 = lq_norm(rho0_field, self.norm_q)
        times = [0.0]
        fields = [rho0_field]
        for j in range(n_steps):
            state = self.step(state, paths.increments[j])
            if state.sup_norm_q > BLOWUP_FACTOR * norm0:
                raise BlowUpError(
                    f"||rho||_{self.norm_q:g} exceeded {BLOWUP_FACTOR:g} x initial "
                    f"at t={state.t:g}; the run left the solution's lifespan"
                )
            if callback is not None:
                callback(j, state)
            if (j + 1) % snapshot_every == 0 or j == n_steps - 1:
                times.append(state.t)
                fields.append(FieldState.from_rfft(self.grid, state.rhat))
        diagnostics = {
            "sup_norm_q": state.sup_norm_q,
            "min_value": state.min_value,
            "max_clip_mass": state.max_clip_mass,
        }
        return SolveResult(np.array(times), fields, diagnostics)


def heat_then_translate(rho0, total_shift, total_time):
    """Closed-form endpoint for drift-free runs: heat flow then translation.

    Independent check target: with no transport nonlinearity the solution
    is the heat semigroup applied to the initial field, translated by the
    accumulated shared shift.
    """
    grid = rho0.grid
    lap = -((2.0 * np.pi) ** 2) * grid.ksq
    phase = np.exp(-2j * np.pi * sum(k * s for k, s in zip(grid.freqs, total_shift)))
    return FieldState.from_rfft(grid, rho0.rhat * np.exp(0.5 * lap * total_time) * phase)


def weak_form_residual(result, paths, noise, kernel, drift_spec, phi):
    """Residual of the weak-form balance for a test field phi over a full run.

    Needs snapshots at every step (snapshot_every=1).  The time integrals
    are left-endpoint Riemann sums; the noise integral uses the recorded
    increments, so the residual measures the time-discretization error of
    the run, not of this diagnostic.
    """
    grid = result.fields[0].grid
    if len(result.fields) != paths.n_steps + 1:
        raise ValueError("weak-form residual needs per-step snapshots")
    phi_hat = grid.rfftn(np.asarray(phi, dtype=float))
    dphi = [grid.irfftn(2j * np.pi * k * phi_hat) for k in grid.freqs]
    d2phi = [
        [grid.irfftn(-4.0 * np.pi**2 * ka * kb * phi_hat) for kb in grid.freqs]
        for ka in grid.freqs
    ]
    phi_vals = np.asarray(phi, dtype=float)
    cell = grid.cell_volume
    dt = paths.dt
    lhs = float(np.sum(result.fields[-1].values * phi_vals) * cell) - float(
        np.sum(result.fields[0].values * phi_vals) * cell
    )
    rhs = 0.0
    symbols = kernel.symbol_grid(grid) if kernel is not None else None
    coords = np.stack(grid.coords(), axis=-1).reshape(-1, grid.d)
    for j in range(paths.n_steps):
        f = result.fields[j]
        t_j = j * dt
        sigma = noise.sigma_at(t_j)
        if symbols is not None:
            vel = np.stack([grid.irfftn(s * f.rhat) for s in symbols], axis=-1)
            forced = eval_drift(drift_spec, coords, vel.reshape(-1, vel.shape[-1])).reshape(vel.shape)
            for c in range(grid.d):
                rhs += dt * float(np.sum(f.values * forced[..., c] * dphi[c]) * cell)
        a = np.eye(grid.d) + sigma @ sigma.T
        for i in range(grid.d):
            for l in range(grid.d):
                rhs += 0.5 * dt * a[i, l] * float(np.sum(f.values * d2phi[i][l]) * cell)
        grad_sigma = [
            sum(dphi[i] * sigma[i, k] for i in range(grid.d)) for k in range(grid.d)
        ]
        for k in range(grid.d):
            rhs += float(np.sum(f.values * grad_sigma[k]) * cell) * paths.increments[j][k]
    return lhs - rhs
