import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twoweight.measure import (DiscreteMeasure, Interval, dump_measure, energy, load_measure, mass,
                               poisson, poisson_outside, tail_weight)

from . import oracles

atoms_st = st.lists(st.tuples(st.floats(-3, 3, allow_nan=False), st.floats(0.01, 10)), min_size=0, max_size=12,
                    unique_by=lambda t: t[0])


def test_mass_examples():
    assert mass(DiscreteMeasure([0.5], [1]), Interval(0, 1)) == 1
    assert mass(DiscreteMeasure(), Interval(0, 1)) == 0
    assert mass(DiscreteMeasure([0.25, 0.75, 1.5], [2, 3, 7]), Interval(0, 1)) == 5


def test_mass_half_open():
    mu = DiscreteMeasure([0.0, 1.0], [1, 2])
    assert mass(mu, Interval(0, 1)) == 1


def test_poisson_examples():
    assert poisson(Interval(0, 1), DiscreteMeasure([0.5], [1])) == pytest.approx(1.0)
    assert poisson(Interval(0, 1), DiscreteMeasure([1.5], [1])) == pytest.approx(0.25)
    assert poisson(Interval(0, 2), DiscreteMeasure([3, -1], [1, 1])) == pytest.approx(0.25)


def test_tail_weight_examples():
    assert tail_weight(Interval(0, 1), 0.5) == 1
    assert tail_weight(Interval(0, 1), 1.5) == 0.5
    assert tail_weight(Interval(0, 2), 7.0) == 0.25


def test_energy_examples():
    assert energy(Interval(0, 1), DiscreteMeasure([0.3], [5])) == 0
    assert energy(Interval(0, 1), DiscreteMeasure([0, 1 - 1e-15], [1, 1])) == pytest.approx(0.25)
    assert energy(Interval(0, 1), DiscreteMeasure()) == 0


def test_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure([0.1, 0.1], [1, 1])
    with pytest.raises(ValueError):
        DiscreteMeasure([0.1], [0.0])
    with pytest.raises(ValueError):
        Interval(0, 0)


def test_sum_merges_atoms():
    a = DiscreteMeasure([0.1, 0.2], [1, 2])
    b = DiscreteMeasure([0.2, 0.3], [3, 4])
    c = a + b
    assert c.positions.tolist() == [0.1, 0.2, 0.3]
    assert c.masses.tolist() == [1, 5, 4]


def test_measure_file_roundtrip(tmp_path):
    mu = DiscreteMeasure([0.125, 0.5, 0.875], [1.5, 2.0, 0.25])
    p = tmp_path / "mu.txt"
    dump_measure(mu, p, header="three atoms")
    assert load_measure(p) == mu


def test_measure_file_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0.1 1 2\n")
    with pytest.raises(ValueError, match="expected"):
        load_measure(p)


@given(atoms_st, st.floats(-2, 2), st.floats(0.05, 3))
def test_poisson_matches_direct_sum(at, left, length):
    mu = DiscreteMeasure.from_atoms(at)
    I = Interval(left, length)
    assert poisson(I, mu) == pytest.approx(oracles.poisson(I, mu), rel=1e-12, abs=1e-14)
    assert mass(mu, I) == pytest.approx(oracles.mass(mu, I), rel=1e-12, abs=1e-14)


@given(atoms_st, st.floats(-2, 2), st.floats(0.05, 3))
def test_poisson_outside_splits(at, left, length):
    mu = DiscreteMeasure.from_atoms(at)
    I = Interval(left, length)
    inside = poisson(I, mu, mu.mask(I))
    assert inside + poisson_outside(I, mu) == pytest.approx(poisson(I, mu), rel=1e-12, abs=1e-14)


@given(atoms_st, st.floats(-2, 2), st.floats(0.05, 3), st.floats(0.1, 10))
def test_energy_scale_free(at, left, length, c):
    """E(J, omega)^2 is invariant under dilation of space and of mass."""
    mu = DiscreteMeasure.from_atoms(at)
    J = Interval(left, length)
    e = energy(J, mu)
    assert 0 <= e <= 0.25 + 1e-12
    assert energy(J, mu.scaled(c)) == pytest.approx(e, rel=1e-9, abs=1e-14)
    J2 = Interval(c * left, c * length)
    assert energy(J2, mu.transformed(dilation=c)) == pytest.approx(e, rel=1e-9, abs=1e-14)
    assert e == pytest.approx(oracles.energy_sq(J, mu), rel=1e-9, abs=1e-14)


@given(st.floats(-5, 5), st.floats(0.01, 4), st.floats(-10, 10))
def test_tail_weight_range(left, length, x):
    I = Interval(left, length)
    s = tail_weight(I, x)
    assert 0 < s <= 1
    assert (s == 1) == (x == I.center)
