from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctrwfrac.measures import (SpectralMeasure, TimeMeasure, load_measure, make_atomic_measure,
                               make_density_measure, symbol_psi)

alphas = st.floats(0.05, 1.95)
weights = st.floats(0.01, 5.0)
atoms = st.lists(st.tuples(alphas, weights), min_size=1, max_size=4)


def test_single_atom():
    rho = make_atomic_measure([(1.0, 1.0)])
    assert rho.total_mass == 1.0
    assert rho.is_atomic and rho.single_order == 1.0
    assert rho.density_nodes == ()


def test_two_atoms_echo():
    rho = make_atomic_measure([(0.5, 0.3), (1.5, 0.7)])
    assert rho.atoms == ((0.5, 0.3), (1.5, 0.7))
    assert rho.total_mass == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("pairs", [[(2.0, 1.0)], [(0.0, 1.0)], [(-0.5, 1.0)], [(1.0, 0.0)],
                                   [(1.0, -1.0)], []])
def test_atomic_rejects(pairs):
    with pytest.raises(ValueError):
        make_atomic_measure(pairs)


@pytest.mark.parametrize("density, support, n, mass", [
    (lambda a: 1.0, (0.5, 1.5), 8, 1.0),
    (lambda a: 2.0, (1.0, 1.5), 4, 1.0),
    (lambda a: a, (0.5, 1.5), 8, 1.0),
])
def test_density_mass(density, support, n, mass):
    rho = make_density_measure(density, support, n)
    assert abs(rho.total_mass - mass) < 1e-12
    assert not rho.is_atomic


def test_density_quadrature_is_exact_to_degree_2n_minus_1():
    n = 5
    rho = make_density_measure(lambda a: 1.0, (0.3, 1.7), n)
    for k in range(2 * n):
        exact = (1.7 ** (k + 1) - 0.3 ** (k + 1)) / (k + 1)
        assert rho.weights @ rho.alphas ** k == pytest.approx(exact, rel=1e-12)


def test_density_default_nodes():
    assert make_density_measure(lambda a: 1.0, (0.5, 1.5)).nodes.size == 32


@pytest.mark.parametrize("support", [(0.0, 1.0), (1.0, 2.0), (1.5, 1.0), (-1.0, 0.5)])
def test_density_support_rejected(support):
    with pytest.raises(ValueError):
        make_density_measure(lambda a: 1.0, support, 4)


def test_density_negative_rejected():
    with pytest.raises(ValueError):
        make_density_measure(lambda a: a - 1.0, (0.5, 1.5), 4)


def test_symbol_examples():
    assert symbol_psi(make_atomic_measure([(1.0, 1.0)]), [2.0]) == -2.0
    rho = make_atomic_measure([(0.5, 0.5), (1.5, 0.5)])
    assert symbol_psi(rho, [4.0]) == pytest.approx(-5.0, abs=1e-14)
    assert symbol_psi(rho, [0.0, 0.0]) == 0.0


@given(atoms, st.lists(st.floats(-10, 10), min_size=1, max_size=3))
def test_symbol_nonpositive(pairs, xi):
    rho = make_atomic_measure(pairs)
    value = symbol_psi(rho, xi)
    assert value <= 0
    assert (value == 0) == (np.linalg.norm(xi) == 0)


@given(atoms, st.floats(0.01, 10), st.integers(0, 2 ** 31))
def test_symbol_radial(pairs, r, seed):
    rho = make_atomic_measure(pairs)
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    xi = np.array([r, 0.0, 0.0])
    assert symbol_psi(rho, q @ xi) == pytest.approx(symbol_psi(rho, xi), rel=1e-12)


@given(atoms, st.floats(0.0, 10), st.floats(1e-3, 10))
def test_symbol_monotone(pairs, r, dr):
    rho = make_atomic_measure(pairs)
    assert symbol_psi(rho, [r]) > symbol_psi(rho, [r + dr])


@given(atoms, atoms, st.floats(0, 20))
def test_symbol_linear_in_measure(p1, p2, r):
    r1, r2 = make_atomic_measure(p1), make_atomic_measure(p2)
    total = symbol_psi(r1 + r2, [r])
    assert total == pytest.approx(symbol_psi(r1, [r]) + symbol_psi(r2, [r]), rel=1e-12, abs=1e-12)


def test_json_round_trip(tmp_path):
    rho = make_atomic_measure([(0.7, 0.2)]) + make_density_measure(lambda a: 1.0, (1.0, 1.5), 3)
    assert SpectralMeasure.from_json(rho.to_json()) == rho
    path = tmp_path / "rho.json"
    path.write_text(rho.to_json())
    assert load_measure(str(path)) == rho
    assert load_measure(rho.to_dict()) == rho
    assert set(rho.to_dict()) == {"atoms", "density_nodes"}


def test_time_measure_domain():
    assert TimeMeasure.atomic([(1.0, 1.0)]).single_order == 1.0
    for bad in (0.0, 1.01):
        with pytest.raises(ValueError):
            TimeMeasure.atomic([(bad, 1.0)])
    with pytest.raises(ValueError):
        TimeMeasure.from_density(lambda b: 1.0, (0.5, 1.2), 4)
    mu = TimeMeasure.from_density(lambda b: 1.0, (0.5, 1.0), 4)
    assert mu.total_mass == pytest.approx(0.5, abs=1e-14)


def test_measures_are_immutable():
    rho = make_atomic_measure([(1.0, 1.0)])
    with pytest.raises(Exception):
        rho.atoms = ()
    with pytest.raises(ValueError):
        rho.weights[0] = 2.0
