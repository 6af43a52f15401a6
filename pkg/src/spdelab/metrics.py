"""Distances, moment estimators, and rate fitting for the coupled studies.

Everything here aggregates immutable per-replica outputs; nothing touches
simulation state.  Confidence intervals are bootstrap percentiles with a
fixed resample count and a dedicated stream, because the theory being
checked provides rates but no variance information.
"""
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import rng
from .errors import AdmissibilityError
from .particles import ParticleEnsemble
from .torus import FieldState, lq_norm

KR_MASS_TOL = 1e-10


def sup_lq_discrepancy(rho_traj, rhoN_traj, q):
    """Largest L^q distance between two field trajectories.

    Parameters
    ----------
    rho_traj, rhoN_traj : sequences of FieldState
        Snapshots on identical grids at identical times.
    q : float
        Norm exponent (>= 1, or inf).

    Returns
    -------
    float
        max over snapshots of ||rho_t - rhoN_t||_q.
    """
    if len(rho_traj) != len(rhoN_traj):
        raise ValueError("trajectories have different snapshot counts")
    worst = 0.0
    for a, b in zip(rho_traj, rhoN_traj):
        if a.grid != b.grid:
            raise ValueError("trajectories live on different grids")
        worst = max(worst, lq_norm(FieldState(a.grid, a.values - b.values), q))
    return worst


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    ci_lo: float
    ci_hi: float


def lm_moment(values, m, n_resamples=10_000, seed=0):
    """Empirical L^m moment of per-replica scalars with a bootstrap 90% CI.

    Parameters
    ----------
    values : array_like
        One nonnegative scalar per replica (at least two).
    m : float
        Moment order, m >= 1.
    n_resamples : int
        Bootstrap resample count (fixed so reports are reproducible).
    seed : int
        Sub-seed of the dedicated bootstrap stream.

    Returns
    -------
    MomentEstimate
        (mean of v^m)^(1/m) and its percentile interval.
    """
    values = np.asarray(values, dtype=float)
    if m < 1:
        raise ValueError(f"moment order must satisfy m >= 1, got {m}")
    if values.size < 2:
        raise ValueError("need at least two replicas for a moment estimate")
    point = float(np.mean(values**m) ** (1.0 / m))
    g = rng.bootstrap_stream(seed)
    idx = g.integers(0, values.size, size=(n_resamples, values.size))
    boots = np.mean(values[idx] ** m, axis=1) ** (1.0 / m)
    lo, hi = np.percentile(boots, [5.0, 95.0])
    return MomentEstimate(point, float(lo), float(hi))


# -- bounded-Lipschitz (Kantorovich-Rubinstein) distance on the circle ------


def _as_atoms(measure):
    """Positions in [-1/2, 1/2) and weights of a one-dimensional measure."""
    if isinstance(measure, ParticleEnsemble):
        if measure.d != 1:
            raise NotImplementedError(
                "exact bounded-Lipschitz distance is implemented only in d=1"
            )
        pos = measure.positions[:, 0]
        w = np.full(pos.size, 1.0 / pos.size)
        return pos, w
    if isinstance(measure, FieldState):
        if measure.grid.d != 1:
            raise NotImplementedError(
                "exact bounded-Lipschitz distance is implemented only in d=1"
            )
        return measure.grid.axis_nodes.copy(), measure.values * measure.grid.h
    pos, w = measure
    return np.asarray(pos, dtype=float), np.asarray(w, dtype=float)


def kr_distance_1d(mu, nu):
    """Exact bounded-Lipschitz distance between probability measures on the
    circle of circumference one.

    The dual runs over phi with Lipschitz constant <= 1 and sup norm <= 1.
    Because the torus diameter is 1/2, any admissible phi can be recentered
    into [-1/4, 1/4], so the sup-norm cap is provably slack and the value
    coincides with the transport distance; the brute-force LP dual (which
    carries the cap explicitly) is kept alongside as the cross-check.  On
    the circle the transport distance is

        min over c of integral |F_mu(x) - F_nu(x) - c| dx,

    with the minimizing c a weighted median of the CDF difference.
    """
    p_mu, w_mu = _as_atoms(mu)
    p_nu, w_nu = _as_atoms(nu)
    for name, w in (("mu", w_mu), ("nu", w_nu)):
        mass = float(np.sum(w))
        if abs(mass - 1.0) > KR_MASS_TOL:
            raise ValueError(f"{name} is not a probability measure: mass={mass!r}")
    pos = np.concatenate([p_mu, p_nu])
    sgn = np.concatenate([w_mu, -w_nu])
    order = np.argsort(pos, kind="stable")
    pos = pos[order]
    sgn = sgn[order]
    # CDF difference is constant on each arc between consecutive atoms
    diff = np.cumsum(sgn)
    lengths = np.empty_like(pos)
    lengths[:-1] = np.diff(pos)
    lengths[-1] = pos[0] + 1.0 - pos[-1]
    keep = lengths > 0
    diff = diff[keep]
    lengths = lengths[keep]
    # weighted median of diff with weights lengths minimizes sum w |x - c|
    srt = np.argsort(diff)
    cum = np.cumsum(lengths[srt])
    c = diff[srt][np.searchsorted(cum, 0.5 * cum[-1])]
    return float(np.sum(lengths * np.abs(diff - c)))


def kr_bruteforce_dual(mu, nu, n_grid=256):
    """LP dual on a uniform grid: the documented oracle for kr_distance_1d.

    Maximizes sum phi d(mu - nu) over grid functions with |phi| <= 1 and
    |phi(x_{i+1}) - phi(x_i)| <= h around the circle (adjacent constraints
    imply the full torus Lipschitz property).  Atoms are CIC-assigned to
    the grid, so agreement with the exact value is up to the grid spacing
    unless the atoms already sit on nodes.
    """
    from scipy.optimize import linprog

    p_mu, w_mu = _as_atoms(mu)
    p_nu, w_nu = _as_atoms(nu)
    h = 1.0 / n_grid
    signed = np.zeros(n_grid)
    for p, w, s in ((p_mu, w_mu, 1.0), (p_nu, w_nu, -1.0)):
        u = (p + 0.5) / h
        base = np.floor(u).astype(int)
        frac = u - base
        base %= n_grid
        np.add.at(signed, base, s * w * (1.0 - frac))
        np.add.at(signed, (base + 1) % n_grid, s * w * frac)
    rows = []
    for i in range(n_grid):
        j = (i + 1) % n_grid
        row = np.zeros(n_grid)
        row[j] = 1.0
        row[i] = -1.0
        rows.append(row)
        rows.append(-row)
    a_ub = np.vstack(rows)
    b_ub = np.full(a_ub.shape[0], h)
    res = linprog(
        -signed,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(-1.0, 1.0)] * n_grid,
        method="highs",
    )
    if not res.success:
        raise RuntimeError(f"LP dual failed: {res.message}")
    return float(-res.fun)


# -- predicted exponents and fitting ----------------------------------------


def admissible_beta_bound(d, q, regime="general"):
    """Upper end of the open beta window for the given regime."""
    if regime == "burgers":
        return 1.0 / 3.0
    return 1.0 / (2.0 * (1.0 + 1.0 / d - 1.0 / q))


def predicted_rate(beta, gamma, d, q, regime="general"):
    """Convergence exponent kappa of the N^(-kappa) error bound.

    regime="general": kappa = min(beta*gamma/d, 1/2 - beta(1 + 1/d - 1/q)),
    valid for beta in (0, 1/(2[1 + 1/d - 1/q])).
    regime="burgers" (d=1, q=2, pointwise interaction):
    kappa = min(beta/2, 1/2 - 3 beta/2), valid for beta in (0, 1/3).
    """
    if regime not in ("general", "burgers"):
        raise ValueError(f"unknown regime {regime!r}")
    bound = admissible_beta_bound(d, q, regime)
    if not 0.0 < beta < bound:
        raise AdmissibilityError(
            f"beta={beta:g} outside the admissible window (0, {bound:g}) "
            f"for the {regime} regime"
            + ("" if regime == "burgers" else f" (bound = 1/(2[1 + 1/{d} - 1/{q:g}]))")
        )
    if regime == "burgers":
        if d != 1 or q != 2:
            raise AdmissibilityError("the burgers regime requires d=1 and q=2")
        return min(beta / 2.0, 0.5 - 1.5 * beta)
    if q <= d or q < 2:
        raise AdmissibilityError(f"need q >= 2 and q > d, got q={q:g}, d={d}")
    if not 0.0 < gamma <= 1.0:
        raise AdmissibilityError(f"smoothing exponent gamma must be in (0,1], got {gamma}")
    return min(beta * gamma / d, 0.5 - beta * (1.0 + 1.0 / d - 1.0 / q))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_ci: tuple


def fit_rate(n_values, errors=None, per_replica=None, m=2.0, n_resamples=10_000, seed=0):
    """Log-log least squares of error against ensemble size.

    Parameters
    ----------
    n_values : sequence of int
        Ensemble sizes (at least 4 points).
    errors : sequence of float, optional
        One positive error per size.  Either this or per_replica is given.
    per_replica : array (R, K), optional
        Per-replica errors; column k belongs to n_values[k].  The point
        estimate fits the per-size L^m moments, and the CI resamples whole
        replicas (rows), which preserves the coupling across sizes induced
        by shared noise.
    m : float
        Moment order used to aggregate per_replica.
    n_resamples, seed : int
        Bootstrap configuration (fixed stream, reproducible).

    Returns
    -------
    RateFit
        slope, intercept, and the 90% bootstrap interval of the slope.
    """
    n_values = np.asarray(n_values, dtype=float)
    if n_values.size < 4:
        raise ValueError("rate fits need at least 4 ensemble sizes")
    log_n = np.log(n_values)
    if per_replica is not None:
        per_replica = np.asarray(per_replica, dtype=float)
        if per_replica.shape[1] != n_values.size:
            raise ValueError("per_replica columns must match n_values")
        if np.any(per_replica <= 0):
            raise ValueError("errors must be positive for a log-log fit")
        point = np.mean(per_replica**m, axis=0) ** (1.0 / m)
        slope, intercept = np.polyfit(log_n, np.log(point), 1)
        g = rng.bootstrap_stream(seed)
        rows = per_replica.shape[0]
        slopes = np.empty(n_resamples)
        for b in range(n_resamples):
            take = g.integers(0, rows, size=rows)
            est = np.mean(per_replica[take] ** m, axis=0) ** (1.0 / m)
            slopes[b] = np.polyfit(log_n, np.log(est), 1)[0]
        lo, hi = np.percentile(slopes, [5.0, 95.0])
        return RateFit(float(slope), float(intercept), (float(lo), float(hi)))
    errors = np.asarray(errors, dtype=float)
    if np.any(errors <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    slope, intercept = np.polyfit(log_n, np.log(errors), 1)
    g = rng.bootstrap_stream(seed)
    idx_all = np.arange(n_values.size)
    slopes = np.empty(n_resamples)
    for b in range(n_resamples):
        take = g.integers(0, idx_all.size, size=idx_all.size)
        if np.unique(take).size < 2:
            slopes[b] = slope
            continue
        slopes[b] = np.polyfit(log_n[take], np.log(errors[take]), 1)[0]
    lo, hi = np.percentile(slopes, [5.0, 95.0])
    return RateFit(float(slope), float(intercept), (float(lo), float(hi)))


@dataclass
class RateReport:
    """Study-level summary: per-size moments, fit, and the predicted slope."""

    n_values: List[int]
    m: float
    estimates: List[MomentEstimate]
    init_terms: List[float]
    fit: RateFit
    kappa_predicted: float
    beta: float
    gamma: Optional[float]
    d: int
    q: float
    epsilon_margin: float = field(default=0.0)

    def __post_init__(self):
        if len(self.n_values) < 4:
            raise ValueError("reports need at least 4 ensemble sizes")
        span = max(self.n_values) / min(self.n_values)
        if span < 4:
            raise ValueError("ensemble sizes must span at least two octaves")
        self.epsilon_margin = self.kappa_predicted / 4.0

    def summary_dict(self):
        return {
            "slope": self.fit.slope,
            "slope_ci": list(self.fit.slope_ci),
            "kappa_predicted": self.kappa_predicted,
            "beta": self.beta,
            "gamma": self.gamma,
            "d": self.d,
            "q": self.q,
            "m": self.m,
        }

    def csv_rows(self):
        """Rows of rates.csv: N, m, estimate, ci_lo, ci_hi, init_term."""
        rows = []
        for n, est, init in zip(self.n_values, self.estimates, self.init_terms):
            rows.append((n, self.m, est.value, est.ci_lo, est.ci_hi, init))
        return rows


def check_moment_monotonicity(values, m):
    """Jensen sanity: the L^m moment is nondecreasing in m.

    Called when reports are assembled; returns the (1, m, m+1) triple so
    callers can log it, and raises if the ordering is violated beyond
    rounding.
    """
    values = np.asarray(values, dtype=float)
    ms = sorted({1.0, float(m), float(m) + 1.0})
    ests = [float(np.mean(values**mm) ** (1.0 / mm)) for mm in ms]
    for a, b in zip(ests, ests[1:]):
        if a > b * (1.0 + 1e-12):
            raise AssertionError(f"moment monotonicity violated: {ests} for orders {ms}")
    return ests
