import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twoweight import characteristics as ch
from twoweight.dyadic import DyadicInterval, GridConfig
from twoweight.hilbert import Truncation
from twoweight.measure import DiscreteMeasure, Interval

from . import oracles

T = Truncation(1e-9)


def small_measure(rng, n):
    return DiscreteMeasure(rng.uniform(0, 1, n), rng.uniform(0.1, 2.0, n))


measures = st.integers(1, 5).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 999), min_size=n, max_size=n, unique=True),
                        st.lists(st.floats(0.05, 3.0), min_size=n, max_size=n))
).map(lambda t: DiscreteMeasure(np.array(t[0]) / 1000 + 3e-4, t[1]))


# ---------------------------------------------------------------- A2 family

def test_a2_offset_zero_measure():
    s = DiscreteMeasure([0.3], [1.0])
    assert ch.a2_offset(s, DiscreteMeasure([], []), GridConfig()).value == 0


def test_a2_offset_two_atoms():
    # the comparability window admits [1/4,1/2) | [1/2,1); equal halves alone give 4
    m = DiscreteMeasure([0.25, 0.75], [1.0, 1.0])
    got = ch.a2_offset(m, m, GridConfig(max_depth=6))
    assert got.value == pytest.approx(8.0)
    assert got.value == pytest.approx(oracles.a2_offset(m, m, 6, 3))
    assert oracles.a2_offset(m, m, 6, 0) == pytest.approx(4.0)


@given(measures, measures, st.floats(0.1, 10))
def test_a2_offset_oracle_and_scaling(s, w, c):
    cfg = GridConfig(max_depth=4)
    v = ch.a2_offset(s, w, cfg).value
    assert v == pytest.approx(oracles.a2_offset(s, w, 4, cfg.r), rel=1e-12)
    assert ch.a2_offset(DiscreteMeasure(s.positions, c * s.masses), w, cfg).value == pytest.approx(c * v, rel=1e-12)


def _a2_hole_oracle(s, w, depth, tails):
    best = 0.0
    for I in oracles.grid(depth, tails):
        out = lambda y, I=I: not oracles.inside(y, I)
        t1 = oracles.poisson(I, w, out) * oracles.mass(s, I) / I.length
        t2 = oracles.mass(w, I) / I.length * oracles.poisson(I, s, out)
        best = max(best, t1 + t2)
    return best


def test_a2_hole_common_atom():
    m = DiscreteMeasure([0.37], [2.0])
    assert ch.a2_hole(m, m, GridConfig()).value == 0


def test_a2_hole_zero_omega():
    s = DiscreteMeasure([0.2, 0.6], [1.0, 1.0])
    assert ch.a2_hole(s, DiscreteMeasure([], []), GridConfig()).value == 0


@given(measures, measures)
def test_a2_hole_oracle(s, w):
    cfg = GridConfig(max_depth=4, tail_doublings=2)
    got = ch.a2_hole(s, w, cfg).value
    assert got == pytest.approx(_a2_hole_oracle(s, w, 4, 2), rel=1e-12, abs=1e-15)


def test_a2_twotailed_scaling():
    s = DiscreteMeasure([0.2, 0.7], [1.0, 0.5])
    w = DiscreteMeasure([0.45], [2.0])
    cfg = GridConfig(max_depth=5)
    base = ch.a2_twotailed(s, w, cfg).value
    # quadratic when both weights scale together
    got = ch.a2_twotailed(DiscreteMeasure(s.positions, 3 * s.masses), DiscreteMeasure(w.positions, 3 * w.masses), cfg)
    assert got.value == pytest.approx(9 * base, rel=1e-12)


def test_a2_twotailed_dominates_local_tails():
    rng = np.random.default_rng(5)
    s, w = small_measure(rng, 6), small_measure(rng, 6)
    cfg = GridConfig(max_depth=5)
    assert ch.a2_twotailed(s, w, cfg, local_tails=True).value <= ch.a2_twotailed(s, w, cfg).value


# ------------------------------------------------------------------ testing

def test_testing_single_atoms():
    cfg = GridConfig(max_depth=3, root=Interval(0.0, 4.0))
    s = DiscreteMeasure([0.5], [1.0])
    w = DiscreteMeasure([2.5], [1.0])
    assert ch.testing(s, w, cfg, T).value == pytest.approx(0.5)


@given(measures, measures)
def test_testing_oracle(s, w):
    cfg = GridConfig(max_depth=3, tail_doublings=2)
    tr = Truncation(1e-9)
    full = ch.testing(s, w, cfg, tr).value
    local = ch.testing(s, w, cfg, tr, local=True).value
    assert full == pytest.approx(oracles.testing(s, w, 3, 1e-9, tails=2), rel=1e-10)
    assert local == pytest.approx(oracles.testing(s, w, 3, 1e-9, tails=2, local=True), rel=1e-10)
    assert local <= full * (1 + 1e-12)


def _weak_oracle(s, w, depth, spread, eps):
    best = 0.0
    G = oracles.grid(depth)
    for I in G:
        f = [1.0 if oracles.inside(y, I) else 0.0 for y, _ in oracles.atoms(s)]
        for J in G:
            if abs(I.n - J.n) > spread or not (I.right == J.left or J.right == I.left):
                continue
            v = sum(m * oracles.hilbert_at(f, s, x, eps) for x, m in oracles.atoms(w) if oracles.inside(x, J))
            best = max(best, abs(v))
    return best


@given(measures, measures)
def test_weak_boundedness_oracle(s, w):
    cfg = GridConfig(max_depth=3)
    got = ch.weak_boundedness(s, w, cfg, T).value
    assert got == pytest.approx(_weak_oracle(s, w, 3, cfg.tau, 1e-9), rel=1e-10, abs=1e-12)


def test_weak_boundedness_empty():
    s = DiscreteMeasure([0.2], [1.0])
    assert ch.weak_boundedness(s, DiscreteMeasure([], []), GridConfig(), T).value == 0


# ------------------------------------------------------------------- energy

def test_energy_single_atom_omega_is_zero():
    rng = np.random.default_rng(2)
    s = small_measure(rng, 5)
    assert ch.energy_char(s, DiscreteMeasure([0.4], [1.0]), GridConfig(max_depth=6)).value == 0


def test_energy_matches_subpartition_oracle():
    rng = np.random.default_rng(11)
    for _ in range(40):
        D = int(rng.integers(1, 5))
        s, w = small_measure(rng, int(rng.integers(1, 7))), small_measure(rng, int(rng.integers(1, 7)))
        got = ch.energy_char(s, w, GridConfig(max_depth=D), depth=D).value ** 2
        want = oracles.energy_char_sq(s, w, D)
        assert got == pytest.approx(want, rel=1e-10, abs=1e-14)


@given(measures, measures)
def test_energy_singleton_partition_lower_bound(s, w):
    # the two children of each top form an admissible subpartition
    D = 3
    val = ch.energy_char(s, w, GridConfig(max_depth=D), depth=D).value ** 2
    for I in oracles.grid(D - 1):
        ms = oracles.mass(s, I)
        if ms <= 0:
            continue
        tot = 0.0
        for J in I.children():
            P = oracles.poisson(J, s, lambda y, J=J, I=I: oracles.inside(y, I) and not oracles.inside(y, J))
            tot += (P / J.length) ** 2 * oracles.energy_sq(J, w) * oracles.mass(w, J)
        assert tot / ms <= val * (1 + 1e-10) + 1e-14


def test_energy_length_normalization_is_larger_on_unit_root():
    rng = np.random.default_rng(3)
    s, w = small_measure(rng, 6), small_measure(rng, 6)
    cfg = GridConfig(max_depth=4)
    assert ch.energy_char(s, w, cfg, scale_by_length=False).value <= ch.energy_char(s, w, cfg).value * (1 + 1e-12)


# ----------------------------------------------------------- forest functionals

def test_characteristic_chain(analyses):
    for an in analyses[:6]:
        s, w, cfg = an.inst.sigma, an.inst.omega, an.inst.cfg
        pe, per_F = ch.pe_characteristic(an.forest, s, w, cfg)
        assert max(per_F.values(), default=0.0) == pytest.approx(pe.value)
        for F, U in an.U.items():
            lg = [J for J in an.lam_g if an.forest.corona_of(J) == F]
            size = ch.size_functional(F, lg, s, w, an.forest, cfg).value
            assert size <= per_F[F.key] * (1 + 1e-12) + 1e-15
            for A in U.forest.members:
                trip = ch.refined_trip_char(U.forest.members, A, F, lg, s, w, an.forest, cfg).value
                assert trip <= size * (1 + 1e-12) + 1e-15


def test_size_functional_empty_and_monotone(analyses):
    an = analyses[0]
    s, w, cfg = an.inst.sigma, an.inst.omega, an.inst.cfg
    F = an.forest.members[0]
    assert ch.size_functional(F, [], s, w, an.forest, cfg).value == 0
    lg = [J for J in an.lam_g if an.forest.corona_of(J) == F]
    half = lg[: len(lg) // 2]
    assert ch.size_functional(F, half, s, w, an.forest, cfg).value <= ch.size_functional(F, lg, s, w, an.forest, cfg).value


def test_pe_sq_values_match_oracle(analyses):
    an = analyses[1]
    s, w = an.inst.sigma, an.inst.omega
    F = an.forest.members[0]
    Is = [I for I in an.forest.corona(F, 5) if oracles.mass(s, I) > 0][:20]
    got = ch.pe_sq_values(F, Is, s, w)
    for v, I in zip(got, Is):
        P = oracles.poisson(I, s, lambda y: oracles.inside(y, F) and not oracles.inside(y, I))
        want = P**2 * oracles.energy_sq(I, w) * oracles.mass(w, I) / oracles.mass(s, I)
        assert v == pytest.approx(want, rel=1e-10, abs=1e-15)


def test_functional_energy_routes(analyses):
    for an in analyses[:4]:
        s, w, cfg = an.inst.sigma, an.inst.omega, an.inst.cfg
        fe = ch.functional_energy(an.forest, s, w, cfg)
        M, _, T_ = ch.functional_energy_matrices(an.forest, s, w, cfg)
        if M.size:
            assert fe.direct == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-6)
        assert fe.kernel_norm == pytest.approx(np.linalg.svd(T_, compute_uv=False)[0], rel=1e-6)
        assert fe.kernel_norm >= fe.direct * (1 - 1e-7)
        assert fe.value >= fe.direct


def test_report_is_consistent():
    rng = np.random.default_rng(8)
    s, w = small_measure(rng, 5), small_measure(rng, 5)
    rep = ch.characteristic_report(s, w, GridConfig(max_depth=5))
    d = rep.to_json()
    assert d["testing_fwd"] <= d["norm"] + 1e-8
    assert d["testing_bwd"] <= d["norm"] + 1e-8
    assert set(d["witnesses"]) >= {"a2_offset", "energy_fwd", "testing_fwd"}
    assert math.isfinite(d["a2_hole"])
