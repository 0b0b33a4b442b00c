from __future__ import annotations

import numpy as np
import pytest

from ctrwfrac.coefficients import gl_coefficients
from ctrwfrac.errors import ConfigError, StabilityViolation
from ctrwfrac.kernel import build_kernel, stability_bound
from ctrwfrac.sampler import (BRANCHES, advance_walker, chi_square_vs_layer, empirical_cf,
                              histogram, sample_ensemble)
from ctrwfrac.scheme import cf_recursion, solve


def _setup(rho, beta, n, h=0.2, d=1, frac=0.8):
    coeffs = gl_coefficients(beta, n, frac * stability_bound(rho, d, h, beta))
    return coeffs, build_kernel(rho, d, h, coeffs=coeffs)


def test_zero_steps_stay_at_origin(mixed_rho):
    coeffs, kernel = _setup(mixed_rho, 0.5, 3)
    ens = sample_ensemble(1, 0, coeffs, kernel, master_seed=7)
    assert ens.paths.shape == (1, 1, 1) and ens.positions()[0, 0] == 0


def test_seed_reproducible_and_worker_independent(mixed_rho):
    coeffs, kernel = _setup(mixed_rho, 0.5, 12)
    a = sample_ensemble(9000, 12, coeffs, kernel, master_seed=3)
    b = sample_ensemble(9000, 12, coeffs, kernel, master_seed=3, n_jobs=3)
    c = sample_ensemble(9000, 12, coeffs, kernel, master_seed=4)
    np.testing.assert_array_equal(a.paths, b.paths)
    assert a.branch_counts == b.branch_counts
    assert not np.array_equal(a.paths, c.paths)
    assert sum(a.branch_counts.values()) == 9000 * 12
    assert set(a.summary()["branch_counts"]) == set(BRANCHES)


def test_ecf_matches_recursion(mixed_rho):
    n, N = 15, 40000
    coeffs, kernel = _setup(mixed_rho, 0.6, n)
    ens = sample_ensemble(N, n, coeffs, kernel, master_seed=11)
    assert empirical_cf(ens, 0.2, 0.0) == 1.0
    for xi in (0.5, 1.0, 2.0):
        ecf = empirical_cf(ens, 0.2, xi)
        assert abs(ecf.imag) < 4 / np.sqrt(N)
        assert abs(ecf.real - cf_recursion(coeffs, kernel, xi, n)[-1]) < 4 / np.sqrt(N)


def test_one_step_chi_square(mixed_rho):
    coeffs, kernel = _setup(mixed_rho, 0.5, 2)
    g = solve(mixed_rho, coeffs, kernel, 1, window_J=60)
    ens = sample_ensemble(50000, 1, coeffs, kernel, master_seed=5)
    res = chi_square_vs_layer(ens, g.layer(1), g.lost[1], n=1)
    assert res.pvalue > 1e-3


def test_multi_step_chi_square_2d(mixed_rho):
    coeffs, kernel = _setup(mixed_rho, 0.7, 6, d=2)
    g = solve(mixed_rho, coeffs, kernel, 6, window_J=15)
    ens = sample_ensemble(30000, 6, coeffs, kernel, master_seed=9)
    assert chi_square_vs_layer(ens, g.layer(6), g.lost[6]).pvalue > 1e-3


def test_beta_one_is_plain_random_walk(cauchy_rho):
    coeffs, kernel = _setup(cauchy_rho, 1.0, 8)
    ens = sample_ensemble(2000, 8, coeffs, kernel, master_seed=1)
    # with c_m = 0 for m >= 2 and no origin weight, only jumps (possibly of size zero) occur
    assert ens.branch_counts["origin"] == 0 and ens.branch_counts["memory"] == 0


def test_histogram_counts_everyone(mixed_rho):
    coeffs, kernel = _setup(mixed_rho, 0.5, 5)
    ens = sample_ensemble(3000, 5, coeffs, kernel, master_seed=2)
    counts, outside = histogram(ens, 10)
    assert counts.sum() + outside == 3000


def test_advance_walker(mixed_rho):
    coeffs, kernel = _setup(mixed_rho, 0.5, 5)
    rng = np.random.default_rng(0)
    path = advance_walker([0], 0, coeffs, kernel, rng)
    assert path.shape == (2,) and path[0] == 0
    path = advance_walker(path, 1, coeffs, kernel, rng)
    assert path.shape == (3,)
    with pytest.raises(ValueError):
        advance_walker([0, 1], 0, coeffs, kernel, rng)


def test_refusals(mixed_rho):
    coeffs, kernel = _setup(mixed_rho, 0.5, 5, frac=1.05)
    with pytest.raises(StabilityViolation):
        sample_ensemble(10, 3, coeffs, kernel, master_seed=0)
    coeffs, kernel = _setup(mixed_rho, 0.5, 5)
    with pytest.raises(ConfigError):
        sample_ensemble(0, 3, coeffs, kernel, master_seed=0)
    with pytest.raises(ConfigError):
        sample_ensemble(10, 3, gl_coefficients(0.6, 5, coeffs.tau), kernel, master_seed=0)
