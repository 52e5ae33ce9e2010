import numpy as np
import pytest
from hypothesis import given, strategies as st

from twoweight.dyadic import DyadicInterval, GridConfig, is_good
from twoweight.haar import (all_coefficients, coordinate_energies, coordinate_energy, expectation,
                            expectation_flagged, haar_diff, haar_function, haar_support, maximal_fn,
                            project, project_local, system)
from twoweight.harness import coordinate_bessel, haar_algebra
from twoweight.measure import DiscreteMeasure, Interval

from . import oracles

ROOT = DyadicInterval(0, 0)


def lattice_measure(data, depth=8, max_atoms=12):
    ks = data.draw(st.lists(st.integers(0, (1 << depth) - 1), min_size=1, max_size=max_atoms, unique=True))
    ms = data.draw(st.lists(st.floats(0.1, 5), min_size=len(ks), max_size=len(ks)))
    return DiscreteMeasure((2 * np.array(sorted(ks)) + 1) / 2.0 ** (depth + 1), ms)


def test_expectation_examples():
    mu = DiscreteMeasure([0.25, 0.75], [1, 3])
    assert expectation([4, 0], mu, ROOT) == pytest.approx(1.0)
    assert expectation([7, 7], mu, DyadicInterval(1, 1)) == 7
    v, flag = expectation_flagged([4, 0], mu, DyadicInterval(2, 0))
    assert v == 0 and flag


def test_haar_diff_examples():
    mu = DiscreteMeasure([0.25, 0.75], [1, 1])
    d = haar_diff([1, -1], mu, ROOT)
    assert d.values.tolist() == [1, -1]
    assert haar_diff([3, 3], mu, ROOT).is_zero or np.allclose(haar_diff([3, 3], mu, ROOT).values, 0)
    one = DiscreteMeasure([0.25], [1])
    assert haar_diff([5.0], one, ROOT).is_zero


def test_project_examples():
    mu = DiscreteMeasure([0.1, 0.3, 0.6, 0.9], [1, 2, 3, 4])
    f = np.array([1.0, -2.0, 0.5, 3.0])
    assert np.all(project(f, mu, []) == 0)
    H = [DyadicInterval(n, k) for n in range(6) for k in range(1 << n)]
    assert np.allclose(project(f, mu, H), f - expectation(f, mu, ROOT), atol=1e-14)
    assert np.all(project_local(f, mu, [DyadicInterval(1, 0)], DyadicInterval(1, 1)) == 0)


def test_haar_support_examples():
    cfg = GridConfig(max_depth=8)
    mu = DiscreteMeasure([0.1, 0.3, 0.6, 0.9], [1, 2, 3, 4])
    assert haar_support(np.ones(4), mu, cfg) == []
    f = np.array([0.0, 0.0, 1.0, 0.0])
    raw = haar_support(f, mu, cfg, good=False)
    # the chain of ancestors of the atom 0.6 whose other half carries mass
    chain = [DyadicInterval(n, int(0.6 * 2**n)) for n in range(8)]
    hs = system(mu, cfg.root)
    want = [I for I in chain if all(hs.mass(C) > 0 for C in I.children())]
    assert raw == sorted(want)
    good = haar_support(f, mu, cfg)
    assert good == [I for I in raw if is_good(I, cfg) and all(is_good(C, cfg) for C in I.children())]


def test_coordinate_energy_examples():
    assert coordinate_energy(ROOT, DiscreteMeasure([0.3], [1])) == 0
    om = DiscreteMeasure([0.0, 1.0], [1, 1])
    J = DyadicInterval(0, 0, Interval(0, 2))
    assert coordinate_energy(J, om) == pytest.approx(0.5)
    d = haar_diff(om.positions, om, J)
    assert d.values.tolist() == [-0.5, 0.5]


def test_maximal_examples():
    mu = DiscreteMeasure([0.25, 0.75], [1, 1])
    assert np.allclose(maximal_fn(np.ones(2), mu), 1)
    M = maximal_fn(np.array([1.0, 0.0]), mu)
    assert M[0] == 1 and M[1] == 0.5


@given(st.data())
def test_haar_diff_matches_oracle(data):
    mu = lattice_measure(data)
    f = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=len(mu), max_size=len(mu))))
    n = data.draw(st.integers(0, 6))
    I = DyadicInterval(n, data.draw(st.integers(0, (1 << n) - 1)))
    assert np.allclose(haar_diff(f, mu, I).values, oracles.haar_diff(f, mu, I), atol=1e-12)


@given(st.data())
def test_haar_function_orthonormal(data):
    mu = lattice_measure(data, max_atoms=10)
    hs = [haar_function(mu, I) for I in (DyadicInterval(n, k) for n in range(8) for k in range(1 << n))]
    hs = [h for h in hs if np.any(h)]
    G = np.array([[np.dot(a * b, mu.masses) for b in hs] for a in hs]) if hs else np.zeros((0, 0))
    assert np.allclose(G, np.eye(len(hs)), atol=1e-12)
    # a complete system: one function per atom beyond the constant
    assert len(hs) == len(mu) - 1


@given(st.data())
def test_haar_algebra_identities(data):
    mu = lattice_measure(data)
    f = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=len(mu), max_size=len(mu))))
    errs = haar_algebra(f, mu, GridConfig(max_depth=8))
    assert max(errs.values()) < 1e-12


@given(st.data())
def test_coordinate_bessel(data):
    om = lattice_measure(data)
    assert coordinate_bessel(om, GridConfig(max_depth=8)) < 1e-10


@given(st.data())
def test_coefficients_match_differences(data):
    mu = lattice_measure(data)
    f = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=len(mu), max_size=len(mu))))
    co = all_coefficients(f, mu, Interval(0, 1), 8)
    for I, c in co.items():
        d = haar_diff(f, mu, I)
        assert c == pytest.approx(d.coefficient, abs=1e-12)
        assert np.dot(d.values**2, mu.masses) == pytest.approx(c * c, abs=1e-12)
    ce = coordinate_energies(mu, Interval(0, 1), 8)
    for J, e in ce.items():
        assert e == pytest.approx(coordinate_energy(J, mu), rel=1e-10, abs=1e-16)


@given(st.data())
def test_maximal_dominates(data):
    mu = lattice_measure(data)
    f = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=len(mu), max_size=len(mu))))
    M = maximal_fn(f, mu)
    assert np.all(M >= np.abs(f) - 1e-12)
    # dyadic maximal theorem in L2 with constant 2
    assert np.dot(M**2, mu.masses) <= 4 * np.dot(f**2, mu.masses) + 1e-12
