import json
import logging

import numpy as np
import pytest

from spdelab.cli import main as cli_main
from spdelab.drift import DriftSpec
from spdelab.errors import BlowUpError, ConfigError, ReplicaFailure, StepSizeError
from spdelab.harness import (
    ExperimentConfig,
    build_setup,
    make_density,
    preset,
    resolve_cutoff,
    run_convergence_study,
    run_corollary_empirical,
    run_coupled,
    run_replica,
    validate_config,
)

logging.getLogger("spdelab").setLevel(logging.WARNING)


def tiny_burgers(**overrides):
    data = {
        "d": 1, "T": 0.1, "M": 256, "beta": 0.25,
        "N": [64, 128, 256, 512], "R": 10, "m": 2, "q": 2,
        "kernel": {"kind": "dirac"},
        "drift": {"kind": "identity"},
        "sigma": 0.5,
        "rho0": {"kind": "uniform-plus-cosine", "amplitude": 0.5},
        "seed": 7,
        "dt": 0.1 / 256,
    }
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


def tiny_vortex(**overrides):
    data = {
        "d": 2, "T": 0.05, "M": 64, "beta": 0.3,
        "N": [64, 128, 256, 512], "R": 10, "m": 2, "q": 4,
        "kernel": {"kind": "biot_savart"},
        "drift": {"kind": "cutoff", "A": "auto", "eta": 0.25},
        "sigma": 0.25,
        "rho0": {"kind": "vortex-pair", "width": 0.1, "amplitude": 0.8},
        "seed": 11,
        "dt": 0.05 / 128,
    }
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


class TestConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentConfig.from_dict({**tiny_burgers().as_dict(), "bogus": 1})

    def test_missing_keys_rejected(self):
        with pytest.raises(ConfigError, match="missing config keys"):
            ExperimentConfig.from_dict({"d": 1})

    def test_default_step_count(self):
        cfg = tiny_burgers(dt=None)
        assert cfg.n_steps == 2048

    def test_roundtrip(self):
        cfg = tiny_burgers()
        again = ExperimentConfig.from_dict(cfg.as_dict())
        assert again == cfg


class TestValidate:
    def test_valid_presets_are_clean(self):
        for name in ("burgers1d", "navier-stokes-2d", "keller-segel-2d"):
            assert validate_config(preset(name)) == []

    def test_dirac_beta_window_named(self):
        errs = validate_config(tiny_burgers(beta=0.4))
        assert any("1/3" in e for e in errs)

    def test_general_beta_bound_named(self):
        errs = validate_config(tiny_vortex(beta=0.41))
        assert any("0.4" in e for e in errs)

    def test_dirac_requires_d1_q2(self):
        errs = validate_config(tiny_burgers(q=4))
        assert any("q=2" in e for e in errs)

    def test_resolution_rule(self):
        errs = validate_config(tiny_burgers(M=64, N=[64, 128, 256, 4096]))
        assert any("resolution rule" in e for e in errs)

    def test_cfl_precheck(self):
        errs = validate_config(tiny_burgers(dt=0.05))
        assert any("pre-check" in e or "dt" in e for e in errs)

    def test_collects_multiple_violations(self):
        errs = validate_config(tiny_burgers(beta=0.4, R=1, m=0.5))
        assert len(errs) >= 3


class TestDeterminism:
    def test_replica_record_bitwise_reproducible(self):
        cfg = tiny_burgers(N=[64], T=0.05, dt=0.05 / 128)
        a = run_replica(cfg, 64, 3)
        b = run_replica(cfg, 64, 3)
        assert a.sup_lq == b.sup_lq
        assert a.kr0 == b.kr0
        assert a.diagnostics["path_hash"] == b.diagnostics["path_hash"]

    def test_common_path_shared_across_sizes(self):
        cfg = tiny_burgers(T=0.05, dt=0.05 / 128)
        setup = build_setup(cfg)
        recs = run_coupled(setup, [64, 128], 0)
        assert recs[64].diagnostics["path_hash"] == recs[128].diagnostics["path_hash"]

    def test_single_and_multi_size_runs_agree(self):
        cfg = tiny_burgers(T=0.05, dt=0.05 / 128)
        setup = build_setup(cfg)
        multi = run_coupled(setup, [64, 128], 1)
        solo = run_coupled(setup, [64], 1)
        assert multi[64].sup_lq == solo[64].sup_lq


@pytest.fixture(scope="module")
def study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    cfg = tiny_burgers()
    return cfg, out, run_convergence_study(cfg, out_dir=str(out))


class TestStudy:

    def test_artifacts_exist(self, study):
        _, out, _ = study
        for name in ("rates.csv", "replicas.csv", "summary.json"):
            assert (out / name).exists()

    def test_rates_schema(self, study):
        _, out, _ = study
        lines = (out / "rates.csv").read_text().splitlines()
        assert lines[0] == "N,m,estimate,ci_lo,ci_hi,init_term"
        assert len(lines) == 5

    def test_replicas_schema(self, study):
        cfg, out, _ = study
        lines = (out / "replicas.csv").read_text().splitlines()
        assert lines[0] == "N,seed,sup_lq,cutoff_ok,kr0"
        assert len(lines) == 1 + len(cfg.N) * cfg.R

    def test_summary_keys(self, study):
        _, out, _ = study
        summary = json.loads((out / "summary.json").read_text())
        for key in ("slope", "slope_ci", "kappa_predicted", "beta", "gamma",
                    "d", "q", "m"):
            assert key in summary
        assert summary["kappa_predicted"] == pytest.approx(0.125)

    def test_init_term_separated(self, study):
        _, _, res = study
        assert all(t > 0 for t in res.report.init_terms)
        assert all(
            est.value >= init * 0.5
            for est, init in zip(res.report.estimates, res.report.init_terms)
        )

    def test_medians_decreasing(self, study):
        _, _, res = study
        meds = res.summary["diagnostics"]["medians"]
        assert all(a > b for a, b in zip(meds, meds[1:]))

    def test_byte_identical_rerun(self, study, tmp_path):
        cfg, out, _ = study
        run_convergence_study(cfg, out_dir=str(tmp_path))
        for name in ("rates.csv", "replicas.csv", "summary.json"):
            assert (tmp_path / name).read_bytes() == (out / name).read_bytes()

    def test_worker_count_does_not_change_artifacts(self, study, tmp_path):
        cfg, out, _ = study
        run_convergence_study(cfg, out_dir=str(tmp_path), workers=2)
        for name in ("rates.csv", "replicas.csv", "summary.json"):
            assert (tmp_path / name).read_bytes() == (out / name).read_bytes()

    def test_sigma_does_not_change_prediction(self, tmp_path):
        quiet = run_convergence_study(
            tiny_burgers(sigma=0.0, N=[64, 128, 256, 512], T=0.05, dt=0.05 / 128),
            dt_check=False,
        )
        noisy = run_convergence_study(
            tiny_burgers(sigma=0.5, N=[64, 128, 256, 512], T=0.05, dt=0.05 / 128),
            dt_check=False,
        )
        assert quiet.report.kappa_predicted == noisy.report.kappa_predicted

    def test_requires_enough_sizes_and_replicas(self):
        with pytest.raises(ConfigError):
            run_convergence_study(tiny_burgers(N=[64, 128, 256]))
        with pytest.raises(ConfigError):
            run_convergence_study(tiny_burgers(R=5))


class TestCutoff:
    def test_auto_level_positive(self):
        cfg = tiny_vortex(R=2, N=[64, 128, 256, 512])
        a, c_grid, sup_norm = resolve_cutoff(cfg)
        assert a > 0 and c_grid > 0 and sup_norm > 0
        assert a >= c_grid * sup_norm

    def test_tiny_threshold_fires_monitor(self):
        cfg = tiny_burgers(T=0.05, dt=0.05 / 128, drift={"kind": "cutoff", "A": 0.05})
        setup = build_setup(cfg)
        recs = run_coupled(setup, [64], 0)
        assert recs[64].cutoff_ok is False

    def test_generous_threshold_stays_ok(self):
        cfg = tiny_burgers(T=0.05, dt=0.05 / 128, drift={"kind": "cutoff", "A": 50.0})
        setup = build_setup(cfg)
        recs = run_coupled(setup, [64], 0)
        assert recs[64].cutoff_ok is True

    def test_counting_inclusion(self):
        # replicas that fire the monitor must also exceed the discrepancy
        # threshold eta when A is sized by the inclusion formula
        cfg = tiny_vortex(R=4, N=[64, 128, 256, 512], T=0.025, dt=0.025 / 64)
        drift_A, _, _ = resolve_cutoff(cfg)
        setup = build_setup(cfg, drift_override=DriftSpec.cutoff(drift_A))
        fired = exceeded = 0
        for r in range(cfg.R):
            recs = run_coupled(setup, list(cfg.N), r)
            for rec in recs.values():
                fired += not rec.cutoff_ok
                exceeded += rec.sup_lq > setup.eta
        assert fired <= exceeded


class TestCorollaryStudy:
    def test_kr_medians_decrease(self, tmp_path):
        cfg = tiny_burgers(N=[64, 256, 1024], R=6, T=0.05, dt=0.05 / 128)
        out = run_corollary_empirical(cfg, out_dir=str(tmp_path))
        meds = [row["median"] for row in out["rows"]]
        assert meds[0] > meds[-1]
        assert (tmp_path / "kr_rates.csv").exists()
        assert out["epsilon"] == pytest.approx(out["kappa_predicted"] / 4.0)

    def test_requires_d1(self):
        with pytest.raises(ConfigError):
            run_corollary_empirical(tiny_vortex())


class TestDumps:
    def test_field_and_particle_dumps(self, tmp_path):
        from spdelab.io import read_field_dump

        cfg = tiny_burgers(N=[64, 128, 256, 512], R=10, T=0.05, dt=0.05 / 128)
        run_convergence_study(cfg, out_dir=str(tmp_path), dump_fields=True,
                              dump_particles=True, dt_check=False)
        d, M, times, values = read_field_dump(tmp_path / "fields_rho.bin")
        assert (d, M) == (1, 256)
        assert times[0] == 0.0 and times[-1] == pytest.approx(0.05)
        assert np.all(np.abs(values.sum(axis=1) / M - 1.0) < 1e-12)
        assert (tmp_path / "fields_rhoN_N512.bin").exists()
        particles = (tmp_path / "particles_N512.csv").read_text().splitlines()
        assert particles[0] == "t,i,x_1"


class TestCli:
    def test_validate_only_flags_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        cfg = tiny_burgers(beta=0.4).as_dict()
        path.write_text(json.dumps(cfg))
        assert cli_main(["--config", str(path), "--validate-only"]) == 2
        assert "1/3" in capsys.readouterr().out

    def test_invalid_config_exit_code(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"d": 1, "bogus": True}))
        assert cli_main(["--config", str(path)]) == 2

    def test_missing_inputs(self):
        assert cli_main([]) == 2

    def test_tiny_run_end_to_end(self, tmp_path, capsys):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(tiny_burgers(
            N=[64, 128, 256, 512], R=10, T=0.05, dt=0.05 / 128).as_dict()))
        out = tmp_path / "out"
        code = cli_main(["--config", str(path), "--out", str(out)])
        assert code == 0
        assert (out / "summary.json").exists()
        printed = capsys.readouterr().out
        assert "kappa_predicted" in printed

    def test_preset_with_override_seed(self, tmp_path):
        # presets load; config keys override; validation still runs
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"R": 2}))
        code = cli_main(["--preset", "burgers1d", "--config", str(path),
                         "--seed", "99", "--validate-only"])
        assert code == 0

    @pytest.mark.parametrize(
        "raised,expected",
        [
            (BlowUpError("norm escaped"), 3),
            (StepSizeError("cfl"), 3),
            (ReplicaFailure("r3", replica=3, cause=StepSizeError("cfl")), 3),
            (ReplicaFailure("r3", replica=3, cause=RuntimeError("boom")), 4),
        ],
    )
    def test_exit_codes_for_run_failures(self, tmp_path, monkeypatch, raised, expected):
        import spdelab.cli as cli_mod

        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(tiny_burgers().as_dict()))

        def explode(*args, **kwargs):
            raise raised

        monkeypatch.setattr(cli_mod, "run_convergence_study", explode)
        assert cli_mod.main(["--config", str(path)]) == expected


class TestDensities:
    def test_uniform_plus_cosine_mass(self):
        fn, sup = make_density({"kind": "uniform-plus-cosine", "amplitude": 0.5}, 1)
        assert sup == 1.5
        x = np.linspace(-0.5, 0.5, 20001)[:-1, None]
        assert np.mean(fn(x)) == pytest.approx(1.0, abs=1e-9)

    def test_vortex_pair_sign_structure(self):
        fn, _ = make_density({"kind": "vortex-pair", "width": 0.08,
                              "amplitude": 0.8}, 2)
        hi = fn(np.array([[-0.2, 0.0]]))[0]
        lo = fn(np.array([[0.25, 0.1]]))[0]
        assert hi > 1.0 > lo > 0.0

    def test_gaussian_bump_normalized(self):
        fn, sup = make_density({"kind": "gaussian-bump-periodized", "width": 0.1}, 2)
        xs = np.linspace(-0.5, 0.5, 201)[:-1]
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        mass = np.sum(fn(pts)) * (1.0 / 200) ** 2
        assert mass == pytest.approx(1.0, abs=1e-6)
        assert sup >= np.max(fn(pts))

    def test_amplitude_window(self):
        with pytest.raises(ConfigError):
            make_density({"kind": "uniform-plus-cosine", "amplitude": 1.5}, 1)
