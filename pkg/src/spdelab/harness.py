"""Experiment orchestration: configuration, presets, coupled replicas, studies.

A replica couples one field solve and one particle run per ensemble size
through the same environmental path: the solver and every ensemble consume
bit-identical increments (and ensembles of different sizes share particle
streams for the indices they have in common), so per-replica discrepancies
are directly comparable across sizes.  Studies fan replicas over a worker
pool, aggregate moments, fit the log-log rate, and emit deterministic CSV
and JSON artifacts.
"""
import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import io as dump_io
from .drift import DriftSpec
from .errors import ConfigError, ReplicaFailure
from .kernels import (
    KernelSpec,
    biot_savart_2d,
    custom_multiplier,
    dirac,
    divergence_residual,
    grid_dual_constant,
    keller_segel,
    load_multiplier_table,
)
from .metrics import (
    RateReport,
    check_moment_monotonicity,
    fit_rate,
    kr_distance_1d,
    lm_moment,
    predicted_rate,
)
from .mollifier import MollifierSpec, deposition_multiplier
from .particles import (
    BrownianPaths,
    CutoffMonitor,
    NoiseModel,
    ParticleEnsemble,
    deposit,
    em_step,
    interaction_force,
    mollify,
)
from .spde import Solver
from .torus import FieldState, PeriodicGrid, lq_norm

log = logging.getLogger("spdelab")

CONFIG_FIELDS = ("d", "T", "dt", "M", "beta", "N", "R", "m", "q",
                 "kernel", "drift", "sigma", "rho0", "seed")
DEFAULT_STEPS = 2048         # default dt = T / 2048
KR_STRIDE = 32               # steps between empirical-distance evaluations
DT_CHECK_TOL = 0.10          # allowed sup-error shift under dt halving


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    T: float
    M: int
    beta: float
    N: tuple
    R: int
    q: float
    kernel: dict
    drift: dict
    sigma: object
    rho0: dict
    seed: int
    m: float = 2.0
    dt: Optional[float] = None

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(CONFIG_FIELDS)
        if unknown:
            raise ConfigError([f"unknown config keys: {sorted(unknown)}"])
        missing = [k for k in CONFIG_FIELDS
                   if k not in data and k not in ("dt", "m")]
        if missing:
            raise ConfigError([f"missing config keys: {missing}"])
        data = dict(data)
        data["N"] = tuple(int(n) for n in data["N"])
        data["kernel"] = dict(data["kernel"])
        data["drift"] = dict(data["drift"])
        data["rho0"] = dict(data["rho0"])
        return cls(**data)

    @property
    def dt_value(self):
        return self.T / DEFAULT_STEPS if self.dt is None else self.dt

    @property
    def n_steps(self):
        return int(round(self.T / self.dt_value))

    def as_dict(self):
        out = {k: getattr(self, k) for k in CONFIG_FIELDS if getattr(self, k) is not None}
        out["N"] = list(self.N)
        return out


# -- initial densities -------------------------------------------------------


def _periodized_gaussian(points, center, width):
    pts = np.atleast_2d(points) - np.asarray(center)
    total = np.zeros(pts.shape[0])
    d = pts.shape[1]
    for shift in np.ndindex(*([3] * d)):
        off = np.asarray(shift, dtype=float) - 1.0
        z = pts + off
        total += np.exp(-np.sum(z * z, axis=1) / (2.0 * width * width))
    return total / (2.0 * np.pi * width * width) ** (d / 2.0)


def make_density(descriptor, d):
    """Named initial densities -> (callable on (n, d) points, sup bound)."""
    kind = descriptor.get("kind")
    if kind == "uniform-plus-cosine":
        a = float(descriptor.get("amplitude", 0.5))
        if not 0 <= a < 1:
            raise ConfigError([f"uniform-plus-cosine amplitude must be in [0,1), got {a}"])

        def fn(points):
            pts = np.atleast_2d(points)
            out = 1.0 + a * np.prod(np.cos(2.0 * np.pi * pts), axis=1)
            return out

        return fn, 1.0 + a
    if kind == "gaussian-bump-periodized":
        width = float(descriptor.get("width", 0.15))
        center = descriptor.get("center", [0.0] * d)

        def fn(points):
            return _periodized_gaussian(points, center, width)

        sup = float(fn(np.zeros((1, d)) + np.asarray(center))[0]) * 1.001
        return fn, sup
    if kind == "vortex-pair":
        width = float(descriptor.get("width", 0.08))
        a = float(descriptor.get("amplitude", 0.8))
        centers = descriptor.get("centers")
        if centers is None:
            centers = [[-0.2] + [0.0] * (d - 1), [0.25] + [0.1] * (d - 1)]
        peak = _periodized_gaussian(np.asarray([centers[0]]), centers[0], width)[0]

        def fn(points):
            g1 = _periodized_gaussian(points, centers[0], width)
            g2 = _periodized_gaussian(points, centers[1], width)
            return 1.0 + a * (g1 - g2) / peak

        return fn, 1.0 + a
    raise ConfigError([f"unknown rho0 kind {kind!r}"])


def density_field(fn, grid):
    """Sample a density on the grid and normalize to exact unit mass."""
    pts = np.stack(grid.coords(), axis=-1).reshape(-1, grid.d)
    values = np.asarray(fn(pts), dtype=float).reshape(grid.shape)
    values = np.maximum(values, 0.0)
    mass = float(np.sum(values) * grid.cell_volume)
    return FieldState(grid, values / mass)


# -- kernel / drift factories ------------------------------------------------


def make_kernel(descriptor, d, q):
    kind = descriptor.get("kind")
    if kind == "dirac":
        return dirac(d=d)
    if kind == "biot_savart":
        return biot_savart_2d(q=q)
    if kind == "keller_segel":
        chi = float(descriptor.get("chi", 1.0 / (2.0 * np.pi)))
        return keller_segel(chi=chi, d=d, q=q)
    if kind == "custom":
        table = load_multiplier_table(descriptor["table"], d)
        return custom_multiplier(
            table,
            d=d,
            holder_gamma=float(descriptor["gamma"]),
            c_k=float(descriptor["C_K"]),
            q=float(descriptor.get("q", q)),
        )
    raise ConfigError([f"unknown kernel kind {kind!r}"])


def make_drift(descriptor):
    """Drift factory; a cutoff level of "auto" is resolved by the study."""
    kind = descriptor.get("kind")
    if kind == "identity":
        return DriftSpec.identity(), None
    if kind == "cutoff":
        level = descriptor.get("A", "auto")
        eta = float(descriptor.get("eta", 0.5))
        if level == "auto":
            return None, eta
        return DriftSpec.cutoff(float(level)), eta
    raise ConfigError([f"unknown drift kind {kind!r}"])


# -- validation ---------------------------------------------------------------


def regime_for(cfg):
    return "burgers" if cfg.kernel.get("kind") == "dirac" else "general"


def validate_config(cfg):
    """All admissibility, resolution, and step-size gates; returns the full
    violation list (empty when the configuration is runnable)."""
    errors = []
    if cfg.d not in (1, 2, 3):
        errors.append(f"dimension d={cfg.d} unsupported (need 1 <= d <= 3)")
    if cfg.T <= 0:
        errors.append(f"horizon T={cfg.T} must be positive")
    if cfg.dt_value <= 0:
        errors.append(f"step dt={cfg.dt_value} must be positive")
    elif abs(cfg.T / cfg.dt_value - round(cfg.T / cfg.dt_value)) > 1e-9:
        errors.append(f"T/dt = {cfg.T / cfg.dt_value:g} must be an integer step count")
    try:
        grid = PeriodicGrid(cfg.d, cfg.M)
    except ValueError as exc:
        errors.append(str(exc))
        grid = None
    regime = regime_for(cfg)
    if regime == "burgers":
        if cfg.d != 1:
            errors.append("pointwise (dirac) interaction requires d=1")
        if cfg.q != 2:
            errors.append("pointwise (dirac) interaction is measured in q=2")
        if not 0.0 < cfg.beta < 1.0 / 3.0:
            errors.append(
                f"beta={cfg.beta:g} outside (0, 1/3), the admissible window "
                "for the pointwise-interaction regime"
            )
    else:
        if not (cfg.q >= 2 and cfg.q > cfg.d):
            errors.append(f"need q >= 2 and q > d, got q={cfg.q:g}, d={cfg.d}")
        else:
            bound = 1.0 / (2.0 * (1.0 + 1.0 / cfg.d - 1.0 / cfg.q))
            if not 0.0 < cfg.beta < bound:
                errors.append(
                    f"beta={cfg.beta:g} outside (0, {bound:g}); the bound is "
                    f"1/(2[1 + 1/{cfg.d} - 1/{cfg.q:g}]) = {bound:g}"
                )
    if not cfg.N:
        errors.append("N list is empty")
    elif grid is not None:
        moll = None
        try:
            moll = MollifierSpec(cfg.d, cfg.beta)
        except ValueError as exc:
            errors.append(str(exc))
        if moll is not None:
            n_max = max(cfg.N)
            rmin = moll.support_radius(n_max)
            if grid.h > rmin / 8.0:
                errors.append(
                    f"resolution rule violated: h={grid.h:g} > {rmin / 8.0:g} "
                    f"(mollifier support radius / 8 at N={n_max})"
                )
    if cfg.R < 2:
        errors.append(f"need at least 2 replicas, got R={cfg.R}")
    if cfg.m < 1:
        errors.append(f"moment order m={cfg.m:g} must be >= 1")
    if cfg.R < 5 * cfg.m:
        log.warning(
            "R=%d replicas is small for moment order m=%g (suggest R >= %d)",
            cfg.R, cfg.m, int(5 * cfg.m),
        )
    try:
        NoiseModel.make(cfg.d, cfg.sigma)
    except ValueError as exc:
        errors.append(str(exc))
    try:
        make_density(cfg.rho0, cfg.d)
    except ConfigError as exc:
        errors.extend(exc.violations)
    try:
        make_kernel(cfg.kernel, cfg.d, cfg.q)
    except ConfigError as exc:
        errors.extend(exc.violations)
    except (KeyError, OSError, ValueError) as exc:
        errors.append(f"kernel: {exc}")
    try:
        make_drift(cfg.drift)
    except ConfigError as exc:
        errors.extend(exc.violations)
    if grid is not None and not errors:
        errors.extend(_cfl_precheck(cfg, grid))
    return errors


def _cfl_precheck(cfg, grid):
    """Step-size sanity against the drift bound on the initial field.

    Advisory gate with a 2x headroom on the initial velocity (the solver
    enforces the true per-step bound at runtime); a finite saturation level
    caps the estimate since |F| <= A + 1 regardless of the field.
    """
    kernel = make_kernel(cfg.kernel, cfg.d, cfg.q)
    fn, _ = make_density(cfg.rho0, cfg.d)
    rho0 = density_field(fn, grid)
    symbols = kernel.symbol_grid(grid)
    vmax = max(
        float(np.max(np.abs(grid.irfftn(s * rho0.rhat)))) for s in symbols
    )
    drift_spec, _ = make_drift(cfg.drift)
    bound = 2.0 * vmax
    if drift_spec is not None and np.isfinite(drift_spec.bound):
        bound = min(bound, drift_spec.bound)
    ratio = bound * cfg.dt_value / grid.h
    if ratio > 0.5:
        return [
            f"step-size pre-check failed: drift bound {bound:g} gives "
            f"max|F| dt / h = {ratio:.3f} > 0.5"
        ]
    return []


def require_valid(cfg):
    errors = validate_config(cfg)
    if errors:
        raise ConfigError(errors)


# -- coupled replica runs -----------------------------------------------------


@dataclass
class ReplicaRecord:
    N: int
    seed: int
    sup_lq: float
    init_lq: float
    cutoff_ok: bool
    kr0: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class Setup:
    """Resolved immutable ingredients of one experiment."""

    cfg: ExperimentConfig
    grid: PeriodicGrid
    moll: MollifierSpec
    kernel: KernelSpec
    drift: DriftSpec
    noise: NoiseModel
    rho0_field: FieldState
    rho0_fn: object
    rho0_sup: float
    eta: Optional[float]
    cutoff_auto: bool


def build_setup(cfg, drift_override=None):
    grid = PeriodicGrid(cfg.d, cfg.M)
    moll = MollifierSpec(cfg.d, cfg.beta)
    kernel = make_kernel(cfg.kernel, cfg.d, cfg.q)
    drift_spec, eta = make_drift(cfg.drift)
    cutoff_auto = drift_spec is None
    if drift_override is not None:
        drift_spec = drift_override
    elif cutoff_auto:
        drift_spec = DriftSpec.identity()  # placeholder until the study sizes A
    fn, sup = make_density(cfg.rho0, cfg.d)
    noise = NoiseModel.make(cfg.d, cfg.sigma)
    return Setup(
        cfg=cfg,
        grid=grid,
        moll=moll,
        kernel=kernel,
        drift=drift_spec,
        noise=noise,
        rho0_field=density_field(fn, grid),
        rho0_fn=fn,
        rho0_sup=sup,
        eta=eta,
        cutoff_auto=cutoff_auto,
    )


def run_coupled(setup, Ns, replica, fine=1, run_at_fine=False, dump_hooks=None):
    """One replica: a field solve and one particle run per ensemble size,
    all consuming the same environmental path.

    `fine` generates the path (and the idiosyncratic increments) at dt/fine;
    with run_at_fine=False they are coarsened back to dt, so a fine=2 pair
    of calls isolates the time-discretization error on identical noise.
    Returns {N: ReplicaRecord}.
    """
    cfg = setup.cfg
    grid = setup.grid
    q = cfg.q
    n_coarse = cfg.n_steps
    dt_fine = cfg.dt_value / fine
    paths_fine = BrownianPaths.generate(cfg.seed, replica, n_coarse * fine, dt_fine, cfg.d)
    paths = paths_fine if run_at_fine else paths_fine.coarsen(fine)
    dt = paths.dt
    n_steps = paths.n_steps

    solver = Solver(grid, setup.kernel, setup.drift, setup.noise, dt, norm_q=q)
    state = solver.initial_state(setup.rho0_field)

    ensembles = {
        N: ParticleEnsemble.sample(setup.rho0_fn, setup.rho0_sup, cfg.d, N, cfg.seed, replica)
        for N in Ns
    }
    vmults = {N: deposition_multiplier(setup.moll, N, grid)[0] for N in Ns}
    symbols = setup.kernel.symbol_grid(grid)
    monitors = {N: CutoffMonitor(getattr(setup.drift, "A", None)) for N in Ns}
    cutoff_level = setup.drift.A if setup.drift.kind == "cutoff" else None

    sup_lq = {N: 0.0 for N in Ns}
    init_lq = {N: 0.0 for N in Ns}
    kr_sup = {N: 0.0 for N in Ns}
    mass_dev_rho = 0.0
    mass_dev_rhoN = {N: 0.0 for N in Ns}
    clip_max = {N: 0.0 for N in Ns}
    sup_norm_rhoN = {N: 0.0 for N in Ns}
    blocks = {}
    block_size = max(1, 256 // max(1, fine))
    # idiosyncratic draws happen at the fine level and are pairwise-summed
    # down to the run step, so fine/coarse reruns share the same noise
    coarsen = 1 if run_at_fine else fine

    def measure(j, rho_values):
        nonlocal mass_dev_rho
        rho_field = FieldState(grid, rho_values)
        mass_dev_rho = max(mass_dev_rho, abs(rho_field.quadrature() - 1.0))
        out = {}
        for N, ens in ensembles.items():
            sn = deposit(ens, grid)
            rhoN = mollify(sn, setup.moll, N)
            clip_max[N] = max(clip_max[N], rhoN.clip_mass)
            mass_dev_rhoN[N] = max(mass_dev_rhoN[N], abs(rhoN.quadrature() - 1.0))
            sup_norm_rhoN[N] = max(sup_norm_rhoN[N], lq_norm(rhoN, q))
            diff = lq_norm(FieldState(grid, rhoN.values - rho_values), q)
            sup_lq[N] = max(sup_lq[N], diff)
            if j == 0:
                init_lq[N] = diff
            if cfg.d == 1 and (j % KR_STRIDE == 0 or j == n_steps):
                kr_sup[N] = max(kr_sup[N], kr_distance_1d(ens, rho_field))
            out[N] = rhoN
        return out

    for j in range(n_steps):
        rho_values = state.values_cache
        rhoNs = measure(j, rho_values)
        if dump_hooks is not None:
            dump_hooks(j, state.t, rho_values, ensembles, rhoNs)
        if j % block_size == 0:
            nb = min(block_size, n_steps - j)
            for N, ens in ensembles.items():
                fine_blk = ens.draw_increments(nb * coarsen, dt_fine)
                blocks[N] = fine_blk.reshape(nb, coarsen, ens.N, ens.d).sum(axis=1)
        for N in Ns:
            ens = ensembles[N]
            rhoN = rhoNs[N]
            forces, raw = interaction_force(ens, rhoN, setup.kernel, setup.drift)
            monitors[N].update(raw, field_norm=lq_norm(rhoN, q))
            dW = blocks[N][j % block_size]
            ensembles[N] = em_step(ens, forces, setup.noise, dW, paths.increments[j], dt, t=state.t)
        state = solver.step(state, paths.increments[j])
    rhoNs = measure(n_steps, state.values_cache)
    if dump_hooks is not None:
        dump_hooks(n_steps, state.t, state.values_cache, ensembles, rhoNs)

    div_res = (
        divergence_residual(setup.kernel, grid)
        if setup.kernel.components == grid.d and grid.d > 1
        else 0.0
    )
    records = {}
    for N in Ns:
        records[N] = ReplicaRecord(
            N=N,
            seed=replica,
            sup_lq=sup_lq[N],
            init_lq=init_lq[N],
            cutoff_ok=monitors[N].ok,
            kr0=kr_sup[N] if cfg.d == 1 else float("nan"),
            diagnostics={
                "mass_dev_rho": mass_dev_rho,
                "mass_dev_rhoN": mass_dev_rhoN[N],
                "clip_mass_max": clip_max[N],
                "sup_norm_rho_q": state.sup_norm_q,
                "sup_norm_rhoN_q": sup_norm_rhoN[N],
                "spde_min_value": state.min_value,
                "spde_max_clip_mass": state.max_clip_mass,
                "max_raw_force": monitors[N].max_abs,
                "max_force_ratio": monitors[N].max_ratio,
                "div_residual": div_res,
                "path_hash": paths_fine.path_hash(),
                "cutoff_A": cutoff_level,
            },
        )
        log.info(
            "replica %d N=%d: sup_lq=%.4g cutoff_ok=%s path=%s",
            replica, N, sup_lq[N], monitors[N].ok,
            records[N].diagnostics["path_hash"],
        )
    return records


def run_replica(cfg, N, replica, drift_override=None):
    """Single (ensemble size, replica) record; pure in (cfg, N, replica)."""
    setup = build_setup(cfg, drift_override=drift_override)
    return run_coupled(setup, [N], replica)[N]


def _study_task(args):
    cfg_dict, drift_kind, drift_A, replica = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    override = DriftSpec.cutoff(drift_A) if drift_kind == "cutoff" else None
    setup = build_setup(cfg, drift_override=override)
    try:
        return replica, run_coupled(setup, list(cfg.N), replica)
    except Exception as exc:
        raise ReplicaFailure(
            f"replica seed={replica} (N in {list(cfg.N)}) failed: {exc}",
            replica=replica,
            cause=exc,
        ) from exc


def resolve_cutoff(cfg, workers=1):
    """Size the saturation level from the observed field norm.

    A = C_grid * (eta + max over replicas of sup_t ||rho_t||_q), with
    C_grid the exact grid dual-norm constant of the kernel.  The
    preliminary solves run without a cutoff; since the sized level strictly
    exceeds every velocity the field can produce, the final (cutoff) solves
    coincide with them bitwise, and a saturation event forces the smoothed
    empirical measure's norm past eta + sup||rho||, hence its distance to
    the field past eta.
    """
    setup = build_setup(cfg, drift_override=DriftSpec.identity())
    c_grid = grid_dual_constant(setup.kernel, setup.grid, cfg.q)
    sup_norm = 0.0
    for replica in range(cfg.R):
        paths = BrownianPaths.generate(cfg.seed, replica, cfg.n_steps, cfg.dt_value, cfg.d)
        solver = Solver(setup.grid, setup.kernel, setup.drift, setup.noise, cfg.dt_value, norm_q=cfg.q)
        result = solver.solve(setup.rho0_field, paths, snapshot_every=cfg.n_steps)
        sup_norm = max(sup_norm, result.diagnostics["sup_norm_q"])
    A = c_grid * (setup.eta + sup_norm)
    log.info("auto cutoff: C_grid=%.4g sup||rho||_q=%.4g eta=%.3g -> A=%.4g",
             c_grid, sup_norm, setup.eta, A)
    return A, c_grid, sup_norm


@dataclass
class StudyResult:
    report: RateReport
    records: List[ReplicaRecord]
    summary: dict


def run_convergence_study(cfg, out_dir=None, workers=1, dump_fields=False,
                          dump_particles=False, dt_check=True):
    """Full coupled study: R replicas x all ensemble sizes.

    Writes rates.csv, replicas.csv, and summary.json under out_dir (plus
    optional field/particle dumps for replica 0), and returns the report
    with per-replica records.
    """
    require_valid(cfg)
    if len(cfg.N) < 4:
        raise ConfigError(["convergence studies need at least 4 ensemble sizes"])
    if cfg.R < 10:
        raise ConfigError(["convergence studies need at least 10 replicas"])
    regime = regime_for(cfg)
    gamma = None
    drift_kind = cfg.drift.get("kind")
    drift_A = cfg.drift.get("A")
    cutoff_meta = {}
    if drift_kind == "cutoff" and drift_A == "auto":
        drift_A, c_grid, sup_norm = resolve_cutoff(cfg, workers=workers)
        cutoff_meta = {"cutoff_A": drift_A, "c_grid": c_grid,
                       "sup_norm_rho_q": sup_norm, "eta": cfg.drift.get("eta", 0.5)}
    kernel = make_kernel(cfg.kernel, cfg.d, cfg.q)
    if regime == "general":
        gamma = kernel.holder_gamma
    kappa = predicted_rate(cfg.beta, gamma, cfg.d, cfg.q, regime=regime)

    tasks = [(cfg.as_dict(), drift_kind, drift_A, r) for r in range(cfg.R)]
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for replica, recs in pool.map(_study_task, tasks):
                results[replica] = recs
    else:
        for task in tasks:
            replica, recs = _study_task(task)
            results[replica] = recs

    records = [results[r][N] for r in range(cfg.R) for N in cfg.N]
    per_replica = np.array([[results[r][N].sup_lq for N in cfg.N] for r in range(cfg.R)])
    init_mat = np.array([[results[r][N].init_lq for N in cfg.N] for r in range(cfg.R)])

    estimates = []
    init_terms = []
    for col, N in enumerate(cfg.N):
        check_moment_monotonicity(per_replica[:, col], cfg.m)
        estimates.append(lm_moment(per_replica[:, col], cfg.m, seed=cfg.seed))
        init_terms.append(float(np.mean(init_mat[:, col] ** cfg.m) ** (1.0 / cfg.m)))
    fit = fit_rate(cfg.N, per_replica=per_replica, m=cfg.m, seed=cfg.seed)
    report = RateReport(
        n_values=list(cfg.N),
        m=cfg.m,
        estimates=estimates,
        init_terms=init_terms,
        fit=fit,
        kappa_predicted=kappa,
        beta=cfg.beta,
        gamma=gamma,
        d=cfg.d,
        q=cfg.q,
    )

    summary = report.summary_dict()
    summary["diagnostics"] = {
        "medians": [float(np.median(per_replica[:, c])) for c in range(len(cfg.N))],
        "cutoff": cutoff_meta,
        "cutoff_failures": int(sum(not rec.cutoff_ok for rec in records)),
        "eta_exceedances": _eta_exceedances(records, cutoff_meta.get("eta")),
    }
    if dt_check:
        summary["diagnostics"]["dt_check"] = _dt_halving_check(
            cfg, drift_kind, drift_A
        )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _write_rates_csv(os.path.join(out_dir, "rates.csv"), report)
        _write_replicas_csv(os.path.join(out_dir, "replicas.csv"), records)
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if dump_fields or dump_particles:
            _write_dumps(cfg, drift_kind, drift_A, out_dir, dump_fields, dump_particles)
    return StudyResult(report=report, records=records, summary=summary)


def _eta_exceedances(records, eta):
    """How many (size, replica) runs overshoot the inclusion threshold."""
    if eta is None:
        return None
    return int(sum(rec.sup_lq > eta for rec in records))


def _dt_halving_check(cfg, drift_kind, drift_A):
    """Rerun replica 0 at the largest size with dt and dt/2 on shared noise;
    the sup-error shift should be small next to the error itself."""
    override = DriftSpec.cutoff(drift_A) if drift_kind == "cutoff" else None
    setup = build_setup(cfg, drift_override=override)
    n_max = max(cfg.N)
    base = run_coupled(setup, [n_max], 0, fine=2, run_at_fine=False)[n_max]
    half = run_coupled(setup, [n_max], 0, fine=2, run_at_fine=True)[n_max]
    shift = abs(base.sup_lq - half.sup_lq)
    ok = shift < DT_CHECK_TOL * base.sup_lq
    if not ok:
        log.warning("dt halving check: shift %.3g vs sup_lq %.3g", shift, base.sup_lq)
    return {"N": n_max, "sup_lq_dt": base.sup_lq, "sup_lq_dt_half": half.sup_lq,
            "shift": shift, "ok": bool(ok)}


def _write_rates_csv(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "m", "estimate", "ci_lo", "ci_hi", "init_term"])
        for row in report.csv_rows():
            w.writerow([row[0], repr(float(row[1]))] + [repr(float(v)) for v in row[2:]])


def _write_replicas_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "seed", "sup_lq", "cutoff_ok", "kr0"])
        for rec in records:
            w.writerow([rec.N, rec.seed, repr(rec.sup_lq),
                        int(rec.cutoff_ok), repr(rec.kr0)])


def _write_dumps(cfg, drift_kind, drift_A, out_dir, dump_fields, dump_particles):
    """Replica-0 snapshot dumps at a decimated stride."""
    override = DriftSpec.cutoff(drift_A) if drift_kind == "cutoff" else None
    setup = build_setup(cfg, drift_override=override)
    n_max = max(cfg.N)
    stride = max(1, cfg.n_steps // 32)
    field_times, field_frames = [], []
    rhoN_times, rhoN_frames = [], []
    particle_rows = []

    def hooks(j, t, rho_values, ensembles, rhoNs):
        if j % stride != 0 and j != cfg.n_steps:
            return
        if dump_fields:
            field_times.append(t)
            field_frames.append(np.array(rho_values).reshape(-1))
            rhoN_times.append(t)
            rhoN_frames.append(rhoNs[n_max].values.reshape(-1))
        if dump_particles:
            for i, x in enumerate(ensembles[n_max].positions):
                particle_rows.append((t, i, x))

    run_coupled(setup, [n_max], 0, dump_hooks=hooks)
    if dump_fields:
        dump_io.write_field_dump(
            os.path.join(out_dir, "fields_rho.bin"), cfg.d, cfg.M, field_times, field_frames
        )
        dump_io.write_field_dump(
            os.path.join(out_dir, f"fields_rhoN_N{n_max}.bin"),
            cfg.d, cfg.M, rhoN_times, rhoN_frames,
        )
    if dump_particles:
        dump_io.write_particle_csv(
            os.path.join(out_dir, f"particles_N{n_max}.csv"), cfg.d, particle_rows
        )


def run_corollary_empirical(cfg, out_dir=None, workers=1):
    """Empirical-measure study (d=1): moments of sup_t of the
    bounded-Lipschitz distance between the raw ensemble and the field,
    reported against the N^(-kappa+eps) reference with eps = kappa/4."""
    require_valid(cfg)
    if cfg.d != 1:
        raise ConfigError(["the empirical-measure study requires d=1"])
    regime = regime_for(cfg)
    kernel = make_kernel(cfg.kernel, cfg.d, cfg.q)
    gamma = kernel.holder_gamma if regime == "general" else None
    kappa = predicted_rate(cfg.beta, gamma, cfg.d, cfg.q, regime=regime)
    eps = kappa / 4.0

    drift_kind = cfg.drift.get("kind")
    drift_A = cfg.drift.get("A")
    if drift_kind == "cutoff" and drift_A == "auto":
        drift_A, _, _ = resolve_cutoff(cfg, workers=workers)
    tasks = [(cfg.as_dict(), drift_kind, drift_A, r) for r in range(cfg.R)]
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for replica, recs in pool.map(_study_task, tasks):
                results[replica] = recs
    else:
        for task in tasks:
            replica, recs = _study_task(task)
            results[replica] = recs
    per_replica = np.array([[results[r][N].kr0 for N in cfg.N] for r in range(cfg.R)])
    rows = []
    for col, N in enumerate(cfg.N):
        est = lm_moment(per_replica[:, col], cfg.m, seed=cfg.seed)
        rows.append({
            "N": N,
            "estimate": est.value,
            "ci_lo": est.ci_lo,
            "ci_hi": est.ci_hi,
            "median": float(np.median(per_replica[:, col])),
            "reference": float(N) ** (-(kappa - eps)),
        })
    out = {
        "kappa_predicted": kappa,
        "epsilon": eps,
        "m": cfg.m,
        "rows": rows,
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "kr_rates.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "m", "estimate", "ci_lo", "ci_hi", "median", "reference"])
            for row in rows:
                w.writerow([row["N"], repr(float(cfg.m))]
                           + [repr(float(row[k])) for k in
                              ("estimate", "ci_lo", "ci_hi", "median", "reference")])
    return out


# -- presets ------------------------------------------------------------------


def preset(name):
    """Shipped configurations for the three worked interaction kernels."""
    if name == "burgers1d":
        return ExperimentConfig.from_dict({
            "d": 1, "T": 0.5, "M": 512, "beta": 0.25,
            "N": [256, 512, 1024, 2048, 4096, 8192],
            "R": 20, "m": 2, "q": 2,
            "kernel": {"kind": "dirac"},
            "drift": {"kind": "identity"},
            "sigma": 0.5,
            "rho0": {"kind": "uniform-plus-cosine", "amplitude": 0.5},
            "seed": 1234,
        })
    if name == "navier-stokes-2d":
        return ExperimentConfig.from_dict({
            "d": 2, "T": 0.25, "M": 128, "beta": 1.0 / 3.0,
            "N": [512, 1024, 2048, 4096, 8192],
            "R": 10, "m": 2, "q": 4,
            "kernel": {"kind": "biot_savart"},
            "drift": {"kind": "cutoff", "A": "auto", "eta": 0.5},
            "sigma": 0.25,
            "rho0": {"kind": "vortex-pair", "width": 0.08, "amplitude": 0.8},
            "seed": 1234,
        })
    if name == "keller-segel-2d":
        return ExperimentConfig.from_dict({
            "d": 2, "T": 0.2, "M": 128, "beta": 0.3,
            "N": [512, 1024, 2048, 4096, 8192],
            "R": 10, "m": 2, "q": 4,
            "kernel": {"kind": "keller_segel", "chi": 1.0 / (2.0 * np.pi)},
            "drift": {"kind": "cutoff", "A": "auto", "eta": 0.5},
            "sigma": 0.25,
            "rho0": {"kind": "gaussian-bump-periodized", "width": 0.15},
            "seed": 1234,
        })
    raise ConfigError([f"unknown preset {name!r}"])
