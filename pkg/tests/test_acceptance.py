"""The ten acceptance criteria at their stated tolerances; each prints one PASS/FAIL line."""
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from twoweight import characteristics as ch
from twoweight import corona, harness, hilbert
from twoweight.dyadic import GridConfig
from twoweight.measure import DiscreteMeasure

from . import oracles
from .test_corona import binding_U_cases

SEEDS50 = list(range(1, 51))


@pytest.fixture
def say(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    return emit


def test_c01_partition_identities(say):
    t = time.perf_counter()
    res = harness.run_suite("identities", SEEDS50, atoms=32)
    dt = time.perf_counter() - t
    worst = max(max(r["residuals"].values()) for r in res.records)
    ok = res.passed and worst < 1e-10 and dt < 60
    say(1, ok, f"50 seeds, 32 atoms: worst residual {worst:.2e}, {dt:.1f}s")
    assert ok, res.failures


def test_c02_haar_algebra(say):
    rng = np.random.default_rng(2024)
    worst, worst_cb = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(2, 33))
        cfg = GridConfig(max_depth=8)
        cells = rng.choice(1 << 8, size=n, replace=False)
        mu = DiscreteMeasure((2 * cells + 1) / 2.0**9, rng.lognormal(0, 1, n))
        f = rng.standard_normal(n)
        alg = harness.haar_algebra(f, mu, cfg)
        worst = max(worst, *alg.values())
        worst_cb = max(worst_cb, harness.coordinate_bessel(mu, cfg))
    ok = worst < 1e-12 and worst_cb < 1e-10
    say(2, ok, f"100 cases: algebra {worst:.2e}, coordinate Bessel {worst_cb:.2e}")
    assert ok


def test_c03_testing_below_norm(say):
    margin = -np.inf
    for seed in SEEDS50:
        for profile in harness.PROFILES:
            inst = harness.generate(seed, profile, atoms=32)
            s, w, cfg = inst.sigma, inst.omega, inst.cfg
            ladder = hilbert.truncation_ladder(s, w)
            N = hilbert.norm_over_ladder(s, w, ladder)
            fwd = max(ch.testing(s, w, cfg, tr).value for tr in ladder)
            bwd = max(ch.testing(w, s, cfg, tr).value for tr in ladder)
            margin = max(margin, fwd - N, bwd - N)
    ok = margin <= 1e-8
    say(3, ok, f"200 instances over all profiles: max(testing - norm) = {margin:.4f}")
    assert ok


def test_c04_corona_guarantees(say):
    bad, worst_child, worst_pe = [], 0.0, 0.0
    for seed in SEEDS50:
        inst = harness.generate(seed, harness.profile_for(seed), atoms=32)
        s, w, cfg = inst.sigma, inst.omega, inst.cfg
        gamma = harness.energy_gamma(s, w, cfg)
        forest = corona.cz_pe_stopping(inst.f, s, w, cfg, gamma=gamma)
        chk = corona.check_corona(forest, inst.f, s, w, cfg)
        worst_child = max(worst_child, chk.child_mass)
        worst_pe = max(worst_pe, chk.pe_sq / gamma)
        if not chk.ok():
            bad.append(seed)
    ok = not bad
    say(4, ok, f"50 seeds: max child mass ratio {worst_child:.3f}, max PE^2/Gamma {worst_pe:.3f}, failing {bad}")
    assert ok


def test_c05_dual_tree_oracle(say):
    t = time.perf_counter()
    res = harness.run_suite("tree-oracle", [1])
    dt = time.perf_counter() - t
    cases = sum(r["cases"] for r in res.records)
    bad = sum(r["mismatches"] for r in res.records)
    ok = res.passed and cases >= 10**4 and bad == 0 and dt < 120
    say(5, ok, f"{cases} cases on trees up to 9 nodes: {bad} mismatches, {dt:.1f}s")
    assert ok, res.failures


def test_c06_U_guarantees(say):
    nontrivial, bad, worst_geo, worst_tight = 0, [], 0.0, -np.inf
    for seed in SEEDS50:
        an = harness.analyse(harness.generate(seed, harness.profile_for(seed), atoms=32))
        for F, U in an.U.items():
            if U.irreducible:
                continue
            nontrivial += 1
            worst_geo = max(worst_geo, U.geo_worst)
            worst_tight = max(worst_tight, U.tight_worst)
            if not U.ok():
                bad.append((seed, F.key))
    # generated coefficients decay like l^2, so every weighted node stops and (tight) is slack there;
    # sparse random omega with the full good support gives coronas that do carry weight
    binding = 0
    for U in binding_U_cases(300):
        if U.irreducible:
            continue
        if not U.ok():
            bad.append(("random", U.tight_worst, U.geo_worst))
        binding += U.tight_worst > -U.forest.flags["gamma"] + 1 + 1e-9
    ok = not bad and nontrivial > 0 and binding > 0
    say(6, ok, f"{nontrivial} nontrivial U forests on 50 seeds, {binding} random forests with binding (tight): "
               f"tight excess {worst_tight:.3e}, geo ratio x Gamma^m {worst_geo:.4f}")
    assert ok, bad


def test_c07_energy_dp(say):
    rng = np.random.default_rng(7)
    worst, depths = 0.0, set()
    for _ in range(500):
        D = int(rng.integers(1, 5))
        depths.add(D)

        def mk():
            n = int(rng.integers(1, 7))
            return DiscreteMeasure(rng.choice(np.arange(1, 1000), n, replace=False) / 1000, rng.uniform(0.1, 2, n))

        s, w = mk(), mk()
        got = ch.energy_char(s, w, GridConfig(max_depth=D), depth=D).value ** 2
        want = oracles.energy_char_sq(s, w, D)
        worst = max(worst, abs(got - want) / max(1.0, want))
    ok = worst <= 1e-10
    say(7, ok, f"500 cases at depths {sorted(depths)}: worst relative error {worst:.2e}")
    assert ok


def test_c08_poisson_decay(say):
    samples = harness.poisson_decay_samples()
    slope, norm = harness.decay_fit(samples)
    base = harness.load_baselines(generate_missing=False)["poisson_decay"]
    ok = len(samples) >= 200 and slope >= 0.7 and norm <= base * (1 + 1e-12)
    say(8, ok, f"{len(samples)} triples at eps 0.1: slope {slope:.3f}, max ratio/(lJ/lI)^0.7 {norm:.4f} "
               f"(baseline {base:.4f})")
    assert ok


def test_c09_regressions(say):
    base = harness.load_baselines(generate_missing=False)
    measured = harness.measure_suite()
    reg = harness.regressions(measured, base)
    missing = sorted(set(base) - set(measured))
    worst = max(measured[k] / base[k] for k in base if k in measured and base[k] > 0)
    ok = not reg and not missing
    say(9, ok, f"{len(measured)} constants, worst measured/baseline {worst:.4f}, regressions {reg}")
    assert ok


def test_c10_cli_determinism(say):
    exe = shutil.which("twoweight")
    cmd = [exe] if exe else [sys.executable, "-m", "twoweight.cli"]
    cmd += ["verify", "--suite", "identities", "--seeds", "1..20"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    ok = a == b and len(a) > 0
    say(10, ok, f"two runs of verify identities 1..20: {len(a)} bytes, identical={a == b}")
    assert ok
