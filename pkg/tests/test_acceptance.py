"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances and run sizes are the stated ones; a criterion that is missed is
reported as a failure, never relaxed.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy import special

from ctrwfrac.coefficients import gl_coefficients, liu_coefficients, make_coefficients
from ctrwfrac.errors import StabilityViolation
from ctrwfrac.experiments import ExperimentConfig, run_distributed_order, run_memoryless
from ctrwfrac.kernel import (build_kernel, kernel_cf, markov_probabilities, p_hat,
                             stability_bound)
from ctrwfrac.measures import SpectralMeasure, TimeMeasure
from ctrwfrac.reference import discrete_laplace_cf, laplace_symbol, layers_needed
from ctrwfrac.sampler import chi_square_vs_layer, empirical_cf, sample_ensemble
from ctrwfrac.scheme import MASS_TOL, cf_recursion, grid_cf, init_grid, run, solve
from ctrwfrac.special import mittag_leffler

pytestmark = pytest.mark.acceptance

H_REFINE = (0.4, 0.2, 0.1, 0.05)
CAUCHY = SpectralMeasure.atomic([(1.0, 1.0)])
TWO_ATOM = SpectralMeasure.atomic([(0.8, 0.5), (1.2, 0.5)])


def _decreasing(errs) -> bool:
    return all(b < a for a, b in zip(errs, errs[1:]))


def _fmt(errs) -> str:
    return "[" + ", ".join(f"{e:.3g}" for e in errs) + "]"


def test_coefficient_identities(verdict):
    t0 = time.perf_counter()
    worst, ok = 0.0, True
    for table_fn in (gl_coefficients, liu_coefficients):
        for beta in (0.1, 0.3, 0.5, 0.7, 0.9):
            t = table_fn(beta, 500, 1e-3)
            c, g = t.c, t.gamma
            ok &= bool(np.all(c[1:] > 0)) and bool(np.all(np.diff(g[1:]) < 0))
            resid = g[1:] + np.concatenate(([0.0], np.cumsum(c[2:]))) - (1 - c[1])
            worst = max(worst, float(np.max(np.abs(resid))))
    runtime = time.perf_counter() - t0
    ok &= worst < 1e-12 and runtime < 1.0
    verdict(1, "coefficient identities", ok, f"max identity residual {worst:.2e}", runtime)
    assert ok


def test_lattice_symbol_limit(verdict):
    t0 = time.perf_counter()
    cases = [(0.5, 1), (1.0, 1), (1.5, 1), (1.0, 2)]
    ok, parts = True, []
    for alpha, d in cases:
        xi = np.zeros(d)
        xi[0] = 1.0
        errs = [abs(p_hat(alpha, d, h, xi) + 0.5) for h in H_REFINE]
        good = _decreasing(errs) and errs[-1] < 0.02
        ok &= good
        parts.append(f"(alpha={alpha}, d={d}) {_fmt(errs)}{'' if good else ' MISSED'}")
    runtime = time.perf_counter() - t0
    ok &= runtime < 30
    verdict(2, "lattice symbol limit", ok, "; ".join(parts), runtime)
    assert ok


def test_kernel_symbol_limit(verdict):
    t0 = time.perf_counter()
    psi = float(TWO_ATOM.psi_radial(1.0))
    errs = []
    for h in H_REFINE:
        k = build_kernel(TWO_ATOM, 1, h, tau=1e-6, beta=1.0)
        errs.append(abs(kernel_cf(k, 1.0) - psi) / abs(psi))
    runtime = time.perf_counter() - t0
    ok = _decreasing(errs) and errs[-1] < 0.03 and runtime < 30
    verdict(3, "kernel symbol limit, two-atom rho", ok, f"relative errors {_fmt(errs)}", runtime)
    assert ok


def test_conservation_and_positivity(verdict):
    t0 = time.perf_counter()
    ok, parts = True, []
    for beta in (0.5, 1.0):
        tau = 0.9 * stability_bound(CAUCHY, 1, 0.1, beta)
        coeffs = gl_coefficients(beta, 500, tau)
        kernel = build_kernel(CAUCHY, 1, 0.1, coeffs=coeffs)
        g = solve(CAUCHY, coeffs, kernel, 500)
        drift = max(abs(float(g.layers[n].sum()) + g.lost[n] - 1) for n in range(501))
        low = float(g.layers.min())
        ok &= drift < 1e-12 and low >= 0
        parts.append(f"beta={beta}: drift {drift:.1e}, min {low:.1e}, lost {g.lost[-1]:.1e}")
    runtime = time.perf_counter() - t0
    ok &= runtime < 60
    verdict(4, "conservation and positivity", ok, "; ".join(parts), runtime)
    assert ok


def test_stability_boundary(verdict):
    t0 = time.perf_counter()
    ok, parts = True, []
    for table_fn, variant in ((gl_coefficients, "GL"), (liu_coefficients, "Liu")):
        bound = stability_bound(CAUCHY, 1, 0.1, 0.5, variant)
        over = table_fn(0.5, 5, 1.05 * bound)
        k_over = build_kernel(CAUCHY, 1, 0.1, coeffs=over)
        refused = 0
        try:
            run(init_grid(1, 0.1, over.tau, 50), over, k_over, 3)
        except StabilityViolation:
            refused += 1
        try:
            sample_ensemble(10, 3, over, k_over, master_seed=0)
        except StabilityViolation:
            refused += 1
        at = table_fn(0.5, 5, bound)
        law = markov_probabilities(build_kernel(CAUCHY, 1, 0.1, coeffs=at))
        p0 = float(law.p[law.radius])
        ok &= refused == 2 and abs(p0) < 1e-12
        parts.append(f"{variant}: refused {refused}/2, p0 at bound {p0:.1e}")
    runtime = time.perf_counter() - t0
    ok &= runtime < 1.0
    verdict(5, "stability boundary", ok, "; ".join(parts), runtime)
    assert ok


def test_memoryless_walk_against_cauchy(verdict):
    t0 = time.perf_counter()
    rep = run_memoryless(ExperimentConfig(CAUCHY, beta=1.0, h_list=(0.2, 0.1, 0.05), t_final=1.0,
                                        x_window=10.0))
    errs = list(rep.column("sup_density_error"))
    runtime = time.perf_counter() - t0
    ok = _decreasing(errs) and errs[-1] < 0.01 and runtime < 120
    verdict(6, "memoryless walk vs Cauchy density", ok, f"sup errors {_fmt(errs)}", runtime)
    assert ok


def test_characteristic_function_convergence(verdict):
    t0 = time.perf_counter()
    probes = (0.5, 1.0, 2.0)
    exact = {xi: math.exp(xi * xi) * special.erfc(xi) for xi in probes}
    errs = {xi: [] for xi in probes}
    for h in (0.2, 0.1, 0.05):
        cap = 0.9 * stability_bound(CAUCHY, 1, h, 0.5)
        n = math.ceil(1.0 / cap)
        coeffs = gl_coefficients(0.5, n, 1.0 / n)
        kernel = build_kernel(CAUCHY, 1, h, coeffs=coeffs)
        g = solve(CAUCHY, coeffs, kernel, n)
        for xi in probes:
            errs[xi].append(abs(grid_cf(g, xi) - exact[xi]))
    runtime = time.perf_counter() - t0
    ok = all(_decreasing(e) and e[-1] < 0.02 for e in errs.values()) and runtime < 180
    ok &= abs(exact[1.0] - 0.4275836) < 1e-7
    detail = "; ".join(f"xi={xi}: {_fmt(e)}" for xi, e in errs.items())
    verdict(7, "grid CF vs Mittag-Leffler, beta=0.5", ok, detail, runtime)
    assert ok


def test_sampler_scheme_equivalence(verdict):
    t0 = time.perf_counter()
    N, n, h = 100_000, 50, 0.1
    tau = 0.9 * stability_bound(CAUCHY, 1, h, 0.5)
    coeffs = gl_coefficients(0.5, n, tau)
    kernel = build_kernel(CAUCHY, 1, h, coeffs=coeffs)
    g = solve(CAUCHY, coeffs, kernel, n)
    ens = sample_ensemble(N, n, coeffs, kernel, master_seed=20240601)
    pvalue = float(chi_square_vs_layer(ens, g.layer(), g.boundary_mass_lost).pvalue)
    gaps = [abs(empirical_cf(ens, h, xi) - grid_cf(g, xi)) for xi in (0.25, 0.5, 1.0, 2.0, 4.0)]
    runtime = time.perf_counter() - t0
    bound = 4 / math.sqrt(N)
    ok = pvalue > 1e-3 and max(gaps) < bound and runtime < 120
    verdict(8, "sampler vs scheme", ok,
            f"chi2 p={pvalue:.3g}, max |ECF - grid CF| {max(gaps):.2e} (bound {bound:.2e})",
            runtime)
    assert ok


def test_mittag_leffler_evaluator(verdict):
    t0 = time.perf_counter()
    x1 = np.linspace(0, 30, 301)
    e1 = float(np.max(np.abs(mittag_leffler(1.0, -x1) / np.exp(-x1) - 1)))
    x2 = np.linspace(0, 5, 201)
    e2 = float(np.max(np.abs(mittag_leffler(0.5, -x2) / special.erfcx(x2) - 1)))
    runtime = time.perf_counter() - t0
    ok = e1 < 1e-8 and e2 < 1e-7 and runtime < 1.0
    verdict(9, "Mittag-Leffler evaluator", ok,
            f"E_1 rel err {e1:.1e}, E_1/2 rel err {e2:.1e}", runtime)
    assert ok


def test_discrete_laplace_limit(verdict):
    t0 = time.perf_counter()
    s, xi = 1.0, 1.0
    target = laplace_symbol(0.5, float(CAUCHY.psi_radial(xi)), s)
    errs = []
    for h in H_REFINE:
        tau = 0.9 * stability_bound(CAUCHY, 1, h, 0.5)
        n = layers_needed(tau, s)
        coeffs = gl_coefficients(0.5, n, tau)
        kernel = build_kernel(CAUCHY, 1, h, coeffs=coeffs)
        errs.append(abs(discrete_laplace_cf(cf_recursion(coeffs, kernel, xi, n), tau, s) - target))
    runtime = time.perf_counter() - t0
    ok = _decreasing(errs) and errs[-1] < 0.05 and runtime < 120
    verdict(10, "discrete Laplace limit", ok, f"errors {_fmt(errs)}", runtime)
    assert ok


def test_distributed_order_reduction(verdict):
    t0 = time.perf_counter()
    tau = 0.9 * stability_bound(TWO_ATOM, 1, 0.1, 0.5)
    single = gl_coefficients(0.5, 200, tau)
    dist = make_coefficients(TimeMeasure.atomic([(0.5, 1.0)]), "GL", 200, tau)
    bitwise = (np.array_equal(single.c, dist.c) and np.array_equal(single.gamma, dist.gamma)
               and single.a_tau == dist.a_tau)
    g1 = solve(TWO_ATOM, single, build_kernel(TWO_ATOM, 1, 0.1, coeffs=single), 200, 400)
    g2 = solve(TWO_ATOM, dist, build_kernel(TWO_ATOM, 1, 0.1, coeffs=dist), 200, 400)
    layer_gap = float(np.max(np.abs(g1.layers - g2.layers)))

    mu = TimeMeasure.atomic([(0.4, 0.5), (0.9, 0.5)])
    rep = run_distributed_order(ExperimentConfig(CAUCHY, mu=mu, h_list=(0.2, 0.1), t_final=0.5,
                                                 n_walkers=100_000, master_seed=2024,
                                                 xi_probes=(0.25, 0.5, 1.0, 2.0, 4.0)))
    mc_ok = len(rep.mc_rows) == 2 and all(
        r["ecf_error_vs_scheme"] < r["ecf_bound"] and r["chi2_pvalue"] > 1e-3
        for r in rep.mc_rows)
    mc_gap = max(r["ecf_error_vs_scheme"] for r in rep.mc_rows)
    runtime = time.perf_counter() - t0
    ok = bitwise and layer_gap < 1e-12 and mc_ok and runtime < 180
    verdict(11, "distributed-order reduction", ok,
            f"coefficients identical {bitwise}, layer gap {layer_gap:.1e}, "
            f"two-atom |ECF - scheme| {mc_gap:.2e} (bound {4 / math.sqrt(1e5):.2e})", runtime)
    assert ok
