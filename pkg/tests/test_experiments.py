from __future__ import annotations

import json

import numpy as np
import pytest

from ctrwfrac.errors import ConfigError, StabilityViolation
from ctrwfrac.experiments import (MC_COLUMNS, OUTPUT_ENV, ROW_COLUMNS, SCHEMA_VERSION,
                                  ExperimentConfig, default_output_dir, run_convergence,
                                  run_distributed_order, run_memoryless, sigma)
from ctrwfrac.kernel import lattice_Q
from ctrwfrac.measures import TimeMeasure

FAST = dict(h_list=(0.4, 0.2), t_final=0.5, window_J=300)


def test_config_validation(cauchy_rho):
    with pytest.raises(ConfigError):
        ExperimentConfig(cauchy_rho, beta=0.5, xi_probes=())
    with pytest.raises(ConfigError):
        ExperimentConfig(cauchy_rho, beta=1.0, variant="Liu")
    with pytest.raises(ConfigError):
        ExperimentConfig(cauchy_rho)
    with pytest.raises(ConfigError):
        ExperimentConfig(cauchy_rho, beta=0.5, h_list=(0.1, 0.2))
    with pytest.raises(ConfigError):
        ExperimentConfig(cauchy_rho, beta=0.5, tau_rule=("fraction_of_bound", 1.5))
    with pytest.raises(ConfigError):
        ExperimentConfig(cauchy_rho, beta=0.5, t_final=None)


def test_config_round_trip(mixed_rho):
    cfg = ExperimentConfig(mixed_rho, mu=TimeMeasure.atomic([(0.4, 0.5), (0.8, 0.5)]),
                           n_walkers=100, **FAST)
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"rho": mixed_rho.to_dict(), "beta": 0.5, "bogus": 1})
    steps = ExperimentConfig.from_dict({"rho": mixed_rho.to_dict(), "beta": 0.5, "n_steps": 4})
    assert steps.t_final is None and steps.n_steps == 4


def test_explicit_tau_must_divide(cauchy_rho):
    cfg = ExperimentConfig(cauchy_rho, beta=0.5, tau_rule=("explicit", 0.3), **FAST)
    with pytest.raises(ConfigError):
        run_convergence(cfg)


def test_convergence_report_shape(cauchy_rho, tmp_path):
    rep = run_convergence(ExperimentConfig(cauchy_rho, beta=0.5, **FAST))
    assert rep.schema_version == SCHEMA_VERSION
    assert all(set(r) == set(ROW_COLUMNS) for r in rep.rows)
    assert all(r["tau"] <= 0.9 * r["tau_bound"] * (1 + 1e-12) for r in rep.rows)
    assert rep.monotone and np.all(rep.column("mass_drift") < 1e-12)
    paths = rep.write(tmp_path)
    assert [p.name for p in paths] == ["convergence_rows.csv", "convergence_mc.csv",
                                       "convergence_report.json"]
    lines = paths[0].read_text().splitlines()
    assert lines[0] == f"# schema_version={SCHEMA_VERSION}"
    assert lines[1].split(",") == list(ROW_COLUMNS)
    assert paths[1].read_text().splitlines()[1].split(",") == list(MC_COLUMNS)
    assert json.loads(paths[2].read_text())["study"] == "convergence"


def test_fingerprint_is_reproducible(cauchy_rho):
    cfg = ExperimentConfig(cauchy_rho, beta=0.6, n_walkers=2000, master_seed=5, **FAST)
    assert run_convergence(cfg).fingerprint() == run_convergence(cfg).fingerprint()


def test_exceeding_bound_is_refused(cauchy_rho):
    lam = 1.1 * (0.5 / lattice_Q(cauchy_rho, 1, 0.4)) ** 2
    cfg = ExperimentConfig(cauchy_rho, beta=0.5, tau_rule=("explicit", lam), h_list=(0.4,),
                           n_steps=3, t_final=None)
    with pytest.raises(StabilityViolation):
        run_convergence(cfg)


def test_memoryless_sigma_rule(cauchy_rho):
    h = 0.2
    tau = 1.02 / (2 * lattice_Q(cauchy_rho, 1, h))
    assert sigma(cauchy_rho, 1, h, tau) == pytest.approx(1.02)
    cfg = ExperimentConfig(cauchy_rho, beta=1.0, h_list=(h,), tau_rule=("explicit", tau),
                           n_steps=2, t_final=None)
    with pytest.raises(StabilityViolation):
        run_memoryless(cfg)
    with pytest.raises(ConfigError):
        run_memoryless(ExperimentConfig(cauchy_rho, beta=0.5))


def test_memoryless_density_decreases(cauchy_rho):
    rep = run_memoryless(ExperimentConfig(cauchy_rho, beta=1.0, h_list=(0.4, 0.2, 0.1)))
    errs = rep.column("sup_density_error")
    assert rep.monotone and errs[-1] < errs[0]
    assert all(sigma(cauchy_rho, 1, r["h"], r["tau"]) <= 1 for r in rep.rows)


def test_single_atom_mu_matches_single_beta(mixed_rho):
    a = run_convergence(ExperimentConfig(mixed_rho, beta=0.5, **FAST))
    b = run_distributed_order(ExperimentConfig(mixed_rho, mu=TimeMeasure.atomic([(0.5, 1.0)]),
                                               **FAST))
    for ra, rb in zip(a.rows, b.rows):
        for key in ("tau", "n_steps", "sup_cf_error", "boundary_loss"):
            assert rb[key] == pytest.approx(ra[key], rel=0, abs=1e-12)


def test_mixed_mu_cross_validates(mixed_rho):
    mu = TimeMeasure.atomic([(0.4, 0.5), (0.9, 0.5)])
    with pytest.raises(ConfigError):
        run_distributed_order(ExperimentConfig(mixed_rho, mu=mu, **FAST))
    rep = run_distributed_order(ExperimentConfig(mixed_rho, mu=mu, n_walkers=20000,
                                                 master_seed=1, **FAST))
    assert rep.rows[0]["sup_cf_error"] is None and rep.notes
    for row in rep.mc_rows:
        assert row["ecf_error_vs_scheme"] < row["ecf_bound"]
        assert row["chi2_pvalue"] > 1e-3


def test_prefactor_weighting_has_exact_oracle(mixed_rho):
    mu = TimeMeasure.atomic([(0.4, 0.5), (0.9, 0.5)])
    rep = run_distributed_order(ExperimentConfig(mixed_rho, mu=mu, weighting="prefactor",
                                                 n_walkers=1000, h_list=(0.4, 0.2, 0.1),
                                                 t_final=0.5, window_J=600))
    errs = rep.column("sup_cf_error")
    assert np.all(np.isfinite(errs)) and rep.monotone


def test_output_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "out"))
    assert default_output_dir() == tmp_path / "out"
    monkeypatch.delenv(OUTPUT_ENV)
    assert default_output_dir().name == "ctrw_output"
