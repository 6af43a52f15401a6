"""Acceptance gate: every criterion runs at its stated tolerance and prints
one PASS/FAIL line.  The two coupled studies (the pointwise-interaction run
in d=1 and the vortex run in d=2) execute once at full scale as module
fixtures and feed several criteria.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.
"""
import time

import numpy as np
import pytest
from scipy.integrate import quad

from spdelab.drift import DriftSpec
from spdelab.harness import preset, run_convergence_study
from spdelab.kernels import dirac
from spdelab.metrics import kr_bruteforce_dual, kr_distance_1d
from spdelab.mollifier import (
    MollifierSpec,
    first_absolute_moment,
    normalization_constant,
    vn_gradient_norm_q,
)
from spdelab.particles import BrownianPaths, NoiseModel, ParticleEnsemble, deposit, mollify
from spdelab.spde import Solver, heat_then_translate
from spdelab.torus import FieldState, PeriodicGrid, lq_norm

SPHERE = {1: 2.0, 2: 2.0 * np.pi}


def report(name, ok, detail):
    print(f"[{name}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def burgers_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("a4")
    t0 = time.time()
    res = run_convergence_study(preset("burgers1d"), out_dir=str(out))
    return res, time.time() - t0, out


@pytest.fixture(scope="module")
def vortex_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("a5")
    t0 = time.time()
    res = run_convergence_study(preset("navier-stokes-2d"), out_dir=str(out))
    return res, time.time() - t0, out


# -- A1: gradient-norm scaling of the rescaled bump -------------------------


def grad_norm_pow_oracle(d, q):
    cd = normalization_constant(d)
    val, _ = quad(
        lambda r: SPHERE[d] * r ** (d - 1) * (24.0 * cd * r * (1 - 4 * r * r) ** 2) ** q,
        0.0, 0.5, epsabs=1e-14, epsrel=1e-13, limit=200,
    )
    return val


def test_a1_gradient_scaling_identity():
    t0 = time.time()
    worst = 0.0
    for d in (1, 2):
        for q in (2, 4):
            base = grad_norm_pow_oracle(d, q)
            for beta in (0.2, 0.3):
                spec = MollifierSpec(d, beta)
                for N in (64, 256, 1024):
                    radius = spec.support_radius(N)
                    M = 1 << int(np.ceil(np.log2(32.0 / radius)))
                    M = max(M, 64)
                    grid = PeriodicGrid(d, M)
                    got = vn_gradient_norm_q(spec, N, q, grid) ** q
                    predicted = float(N) ** (q * beta * (1 + 1.0 / d) - beta)
                    rel = abs(got / base / predicted - 1.0)
                    worst = max(worst, rel)
    wall = time.time() - t0
    report(
        "A1", worst <= 1e-4 and wall < 10.0,
        f"max relative deviation {worst:.3e} (tol 1e-4) over 24 cases, {wall:.1f}s",
    )


# -- A2: exact translation oracle --------------------------------------------


def test_a2_translation_oracle():
    t0 = time.time()
    g = PeriodicGrid(1, 256)
    T, J = 0.5, 2048
    dt = T / J
    sigma = 0.7
    rho0 = FieldState(g, 1.0 + 0.5 * np.cos(2 * np.pi * g.axis_nodes))
    paths = BrownianPaths.generate(2024, 0, J, dt, 1)
    solver = Solver(g, None, DriftSpec.identity(), NoiseModel.make(1, sigma), dt)
    res = solver.solve(rho0, paths, snapshot_every=J)
    shift = sigma * np.sum(paths.increments, axis=0)
    exact = heat_then_translate(rho0, shift, T)
    err = lq_norm(FieldState(g, res.fields[-1].values - exact.values), 2)
    wall = time.time() - t0
    report("A2", err <= 1e-10 and wall < 5.0,
           f"L2 error {err:.3e} (tol 1e-10) vs heat-then-translate, {wall:.1f}s")


# -- A3: deterministic pointwise-interaction run vs closed-form reference ---


def cole_hopf_reference(x_targets, t, viscosity=0.5, n_quad=4096, images=8):
    """Closed-form endpoint via the heat-kernel quotient.

    With u = 2 rho and mean speed c = 2, v = u - c solves the mean-zero
    viscous conservation law; v = -2 nu (log phi)_x with phi the heat
    evolution of exp(-P0/(2 nu)), P0 the antiderivative of v0.  All
    integrals are rectangle sums on a fine grid, independent of the solver.
    """
    c = 2.0
    hf = 1.0 / n_quad
    y = -0.5 + np.arange(n_quad) * hf
    p0 = np.sin(2 * np.pi * y) / (2 * np.pi)  # int of v0 = cos(2 pi s)
    phi0 = np.exp(-p0 / (2.0 * viscosity))
    var = 2.0 * viscosity * t
    z = (x_targets - c * t)[:, None] - y[None, :]
    kern = np.zeros_like(z)
    kern_x = np.zeros_like(z)
    for n in range(-images, images + 1):
        w = z + n
        gauss = np.exp(-w * w / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)
        kern += gauss
        kern_x += gauss * (-w / var)
    phi = kern @ phi0 * hf
    phi_x = kern_x @ phi0 * hf
    v = -2.0 * viscosity * phi_x / phi
    return (c + v) / 2.0


def _burgers_endpoint(J):
    g = PeriodicGrid(1, 256)
    T = 0.5
    dt = T / J
    rho0 = FieldState(g, 1.0 + 0.5 * np.cos(2 * np.pi * g.axis_nodes))
    solver = Solver(g, dirac(d=1), DriftSpec.identity(), NoiseModel.make(1, 0.0), dt)
    paths = BrownianPaths(dt=dt, increments=np.zeros((J, 1)))
    res = solver.solve(rho0, paths, snapshot_every=J)
    return g, res.fields[-1].values


def test_a3_burgers_cole_hopf():
    t0 = time.time()
    g, end = _burgers_endpoint(4096)
    ref = cole_hopf_reference(g.axis_nodes, 0.5)
    ref_norm = np.sqrt(np.sum(ref**2) * g.h)
    err = np.sqrt(np.sum((end - ref) ** 2) * g.h) / ref_norm
    _, end_half = _burgers_endpoint(8192)
    err_half = np.sqrt(np.sum((end_half - ref) ** 2) * g.h) / ref_norm
    ratio = err / err_half
    wall = time.time() - t0
    report(
        "A3",
        err <= 1e-4 and 3.4 <= ratio <= 4.6 and wall < 30.0,
        f"rel L2 error {err:.3e} (tol 1e-4), halving ratio {ratio:.2f} "
        f"(window [3.4, 4.6]), {wall:.1f}s",
    )


# -- A4: d=1 pointwise-interaction rate study --------------------------------


def test_a4_burgers_rate_study(burgers_study):
    res, wall, _ = burgers_study
    meds = res.summary["diagnostics"]["medians"]
    strictly_decreasing = all(a > b for a, b in zip(meds, meds[1:]))
    slope = res.report.fit.slope
    ci = res.report.fit.slope_ci
    ok = (
        strictly_decreasing
        and slope <= -0.08
        and ci[1] < 0.0
        and res.report.kappa_predicted == pytest.approx(0.125)
    )
    report(
        "A4", ok,
        f"medians {['%.4f' % m for m in meds]} strictly decreasing="
        f"{strictly_decreasing}, slope {slope:.3f} (gate -0.08), 90% CI "
        f"[{ci[0]:.3f}, {ci[1]:.3f}], predicted exponent "
        f"{res.report.kappa_predicted}, {wall / 60:.1f} min",
    )


# -- A5: d=2 vortex-kernel rate study ----------------------------------------


def test_a5_vortex_rate_study(vortex_study):
    res, wall, _ = vortex_study
    meds = res.summary["diagnostics"]["medians"]
    decreasing = all(a > b for a, b in zip(meds, meds[1:]))
    slope = res.report.fit.slope
    ok_fraction = np.mean([rec.cutoff_ok for rec in res.records])
    ok = (
        decreasing
        and slope <= -0.05
        and ok_fraction >= 0.9
        and res.report.kappa_predicted == pytest.approx(1.0 / 12.0)
    )
    report(
        "A5", ok,
        f"medians {['%.4f' % m for m in meds]} decreasing={decreasing}, "
        f"slope {slope:.3f} (gate -0.05), cutoff-ok fraction {ok_fraction:.2f} "
        f"(gate 0.9), predicted exponent {res.report.kappa_predicted:.4f}, "
        f"{wall / 60:.1f} min",
    )


# -- A6: conservation, positivity, incompressibility --------------------------


def test_a6_conservation_and_positivity(burgers_study, vortex_study):
    worst_mass = 0.0
    worst_clip = 0.0
    worst_div = 0.0
    min_value = 0.0
    for res, _, _ in (burgers_study, vortex_study):
        for rec in res.records:
            diag = rec.diagnostics
            worst_mass = max(worst_mass, diag["mass_dev_rho"], diag["mass_dev_rhoN"])
            worst_clip = max(worst_clip, diag["spde_max_clip_mass"], diag["clip_mass_max"])
            worst_div = max(worst_div, diag["div_residual"])
            min_value = min(min_value, diag["spde_min_value"])
    ok = worst_mass <= 1e-12 and worst_clip <= 1e-6 and worst_div <= 1e-10
    report(
        "A6", ok,
        f"mass deviation {worst_mass:.2e} (tol 1e-12), clipped mass "
        f"{worst_clip:.2e} (tol 1e-6), divergence residual {worst_div:.2e} "
        f"(tol 1e-10), field min {min_value:.2e}",
    )


# -- A7: smoothing gap against the raw ensemble -------------------------------


def _random_lipschitz(rng, n_modes=4):
    """1-Lipschitz, sup-bounded test function with an exact closed form."""
    ks = rng.integers(1, 6, size=n_modes)
    amps = rng.uniform(-1.0, 1.0, size=n_modes)
    phases = rng.uniform(0.0, 1.0, size=n_modes)
    lip = np.sum(np.abs(amps) * 2 * np.pi * ks)
    scale = max(lip, np.sum(np.abs(amps)), 1e-12)

    def phi(x):
        out = np.zeros_like(np.asarray(x, dtype=float))
        for k, a, p in zip(ks, amps, phases):
            out += a * np.sin(2 * np.pi * k * (x - p))
        return out / scale

    return phi


def test_a7_mollification_gap():
    t0 = time.time()
    g = PeriodicGrid(1, 512)
    moll = MollifierSpec(1, 0.25)
    m1 = first_absolute_moment(1)
    rng = np.random.default_rng(77)
    density = lambda p: 1.0 + 0.5 * np.cos(2 * np.pi * p[:, 0]).reshape(-1)
    worst_margin = np.inf
    for N in (256, 1024, 4096):
        ens = ParticleEnsemble.sample(density, 1.5, 1, N, 770, 0)
        rhoN = mollify(deposit(ens, g), moll, N)
        bound = N ** (-moll.beta) * m1 + 2 * g.h
        for _ in range(20):
            phi = _random_lipschitz(rng)
            gap = abs(
                float(np.sum(rhoN.values * phi(g.axis_nodes)) * g.h)
                - float(np.mean(phi(ens.positions[:, 0])))
            )
            worst_margin = min(worst_margin, bound - gap)
    wall = time.time() - t0
    report(
        "A7", worst_margin >= 0.0 and wall < 60.0,
        f"smallest bound margin {worst_margin:.3e} over 60 samples "
        f"(bound N^(-beta) m1 + 2h), {wall:.1f}s",
    )


# -- A8: saturation-event counting inequality ---------------------------------


def test_a8_cutoff_inclusion_counting(burgers_study, vortex_study):
    details = []
    ok = True
    for label, (res, _, _) in (("d=1", burgers_study), ("d=2", vortex_study)):
        eta = res.summary["diagnostics"]["cutoff"].get("eta", 0.5)
        fired = sum(not rec.cutoff_ok for rec in res.records)
        exceeded = sum(rec.sup_lq > eta for rec in res.records)
        ok = ok and fired <= exceeded
        details.append(f"{label}: fired {fired} <= exceeded {exceeded} (eta={eta})")
    report("A8", ok, "; ".join(details))


# -- A9: transport-distance oracle --------------------------------------------


def test_a9_kr_oracle():
    t0 = time.time()
    rng = np.random.default_rng(99)
    nodes = -0.5 + np.arange(64) / 64.0
    worst = 0.0
    for _ in range(50):
        idx_mu = rng.choice(64, size=6, replace=False)
        idx_nu = rng.choice(64, size=6, replace=False)
        w_mu = rng.uniform(0.1, 1.0, size=6)
        w_nu = rng.uniform(0.1, 1.0, size=6)
        mu = (nodes[idx_mu], w_mu / w_mu.sum())
        nu = (nodes[idx_nu], w_nu / w_nu.sum())
        worst = max(worst, abs(kr_distance_1d(mu, nu) - kr_bruteforce_dual(mu, nu, n_grid=64)))
    delta = kr_distance_1d((np.array([0.0]), np.array([1.0])),
                           (np.array([0.25]), np.array([1.0])))
    wall = time.time() - t0
    ok = worst <= 1e-6 and abs(delta - 0.25) <= 1e-9
    report(
        "A9", ok,
        f"max LP-dual disagreement {worst:.2e} (tol 1e-6) over 50 pairs; "
        f"point-mass pair gives {delta:.10f} (0.25 +- 1e-9), {wall:.1f}s",
    )
