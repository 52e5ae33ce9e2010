"""Seeded instances, verification suites and measured-constant baselines."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import characteristics as ch
from . import corona, forms, hilbert
from .dyadic import DyadicInterval, GridConfig, is_good
from .haar import (all_coefficients, coordinate_energies, expectation, good_haar_grid,
                   haar_function, haar_support, maximal_fn, project, system)
from .measure import DiscreteMeasure, Interval, energy, poisson

log = logging.getLogger(__name__)

PROFILES = ("uniform", "clustered", "common-atoms", "adversarial-spike")
SUITES = ("identities", "lemmas", "coronas", "theorem", "tree-oracle")
BASELINE_FILE = "baselines.json"
REGRESSION_FACTOR = 1.05


@dataclass
class Instance:
    sigma: DiscreteMeasure
    omega: DiscreteMeasure
    f: np.ndarray
    g: np.ndarray
    cfg: GridConfig
    seed: int
    profile: str

    def to_json(self) -> dict:
        c = self.cfg
        return {
            "seed": self.seed, "profile": self.profile,
            "config": {"r": c.r, "eps": c.eps, "tau": c.tau, "max_depth": c.max_depth, "gamma": c.gamma,
                       "theta": c.theta, "tail_doublings": c.tail_doublings,
                       "root": [c.root.left, c.root.length]},
            "sigma": [[x, m] for x, m in zip(self.sigma.positions.tolist(), self.sigma.masses.tolist())],
            "omega": [[x, m] for x, m in zip(self.omega.positions.tolist(), self.omega.masses.tolist())],
            "f": self.f.tolist(), "g": self.g.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Instance":
        c = dict(d.get("config", {}))
        if "root" in c:
            c["root"] = Interval(*c["root"])
        cfg = GridConfig(**c)
        sigma = DiscreteMeasure.from_atoms(map(tuple, d["sigma"]))
        omega = DiscreteMeasure.from_atoms(map(tuple, d["omega"]))
        return cls(sigma, omega, np.asarray(d["f"], float), np.asarray(d["g"], float), cfg,
                   int(d.get("seed", 0)), d.get("profile", "file"))


def _cascade(rng, count, depth, anchors=(), pool=None):
    """Distinct cell midpoints (2k+1)/2^(depth+1) placed by a multiscale cascade.

    Each new cell is uniform inside the depth-d ancestor of an existing or anchor
    cell, d uniform in 0..depth-1, so intervals at every scale tend to carry mass
    in both halves. pool, if given, restricts the first cell to those cells.
    """
    cells = [int(k) for k in anchors]
    out = set(cells[:count])
    first = rng.choice(np.arange(1 << depth) if pool is None else np.array(sorted(pool)))
    if not cells:
        cells.append(int(first))
        out.add(int(first))
    guard = 0
    while len(out) < count and guard < 100 * count:
        guard += 1
        base = cells[rng.integers(0, len(cells))]
        d = int(rng.integers(0, depth))
        span = 1 << (depth - d)
        lo = (base // span) * span
        k = int(lo + rng.integers(0, span))
        if pool is not None and k not in pool:
            continue
        if k not in out:
            out.add(k)
            cells.append(k)
    k = np.array(sorted(out))
    return (2 * k + 1) / 2.0 ** (depth + 1)


def _good_haar_cells(cfg: GridConfig):
    """Intervals I with I and both children good, by depth, above the atom depth."""
    out = {}
    for n in range(cfg.max_depth):
        out[n] = [I for I in (DyadicInterval(n, k, cfg.root) for k in range(1 << n))
                  if is_good(I, cfg) and all(is_good(C, cfg) for C in I.children())]
    return out


def _chain(rng, cfg: GridConfig, table, start_depth: int):
    """Nested good intervals, each at least tau levels below the previous one."""
    I = table[start_depth][rng.integers(0, len(table[start_depth]))]
    out = [I]
    while True:
        cand = [J for n in range(I.n + cfg.tau, cfg.max_depth) for J in table[n] if I.contains(J)]
        if not cand:
            return out
        I = cand[rng.integers(0, len(cand))]
        out.append(I)


def _chain_cells(rng, cfg: GridConfig, chain):
    """One depth-D cell in each child of every chain interval."""
    D = cfg.max_depth
    cells = []
    for I in chain:
        for C in I.children():
            span = 1 << (D - C.n)
            cells.append(int(C.k * span + rng.integers(0, span)))
    return cells


def _cells(xs, depth):
    return [int(x * 2.0**depth) for x in xs]


def _haar_combination(rng, mu: DiscreteMeasure, cfg: GridConfig, density: float = 0.7):
    """Sum of c_I h_I over a random subset of the good Haar grid; mean zero on the root."""
    grid_ = good_haar_grid(mu, cfg)
    out = np.zeros(len(mu))
    for I in grid_:
        if rng.random() < density:
            out += rng.standard_normal() * haar_function(mu, I)
    return out


def generate(seed: int, profile: str = "uniform", atoms: int = 16, depth: int = 8,
             cfg: GridConfig | None = None) -> Instance:
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {', '.join(PROFILES)}")
    cfg = GridConfig(max_depth=depth) if cfg is None else cfg
    D = cfg.max_depth
    rng = np.random.default_rng([seed, PROFILES.index(profile)])
    n = atoms
    table = _good_haar_cells(cfg)
    top = 3 if profile == "clustered" else 1
    chains = [_chain(rng, cfg, table, int(rng.integers(0, top + 1))) for _ in range(2)]
    cs = [k for c in chains for k in _chain_cells(rng, cfg, c)]
    shared_chain = chains[int(rng.integers(0, 2))]
    cw = _chain_cells(rng, cfg, shared_chain) + _chain_cells(rng, cfg, _chain(rng, cfg, table, 0))
    if profile == "clustered":
        # both measures live inside the first chain's top interval
        pool = set(range(chains[0][0].k << (D - chains[0][0].n), (chains[0][0].k + 1) << (D - chains[0][0].n)))
        cs = [k for k in _chain_cells(rng, cfg, chains[0])]
        cw = [k for k in _chain_cells(rng, cfg, chains[0])]
    else:
        pool = None
    xs = _cascade(rng, n, D, anchors=cs, pool=pool)
    xw = _cascade(rng, n, D, anchors=cw + _cells(xs, D)[:2], pool=pool)
    if profile == "common-atoms":
        shared = rng.choice(xs, size=max(1, n // 3), replace=False)
        xw = np.union1d(shared, np.setdiff1d(xw, xs)[: n - shared.size])
        if xw.size < n:
            free = np.setdiff1d((2 * np.arange(1 << D) + 1) / 2.0 ** (D + 1), np.union1d(xs, xw))
            xw = np.union1d(xw, rng.choice(free, size=n - xw.size, replace=False))
    ms, mw = rng.uniform(0.5, 2.0, xs.size), rng.uniform(0.5, 2.0, xw.size)
    if profile == "clustered":
        ms, mw = rng.lognormal(0, 1, xs.size), rng.lognormal(0, 1, xw.size)
    if profile == "adversarial-spike":
        ms[rng.integers(0, xs.size)] *= 50.0
        mw[rng.integers(0, xw.size)] *= 50.0
    sigma, omega = DiscreteMeasure(xs, ms), DiscreteMeasure(xw, mw)
    f = _haar_combination(rng, sigma, cfg)
    g = _haar_combination(rng, omega, cfg)
    return Instance(sigma, omega, f, g, cfg, seed, profile)


def profile_for(seed: int) -> str:
    return PROFILES[seed % len(PROFILES)]


# ----------------------------------------------------------------- analysis

@dataclass
class Analysis:
    inst: Instance
    trunc: hilbert.Truncation
    lam_f: list
    lam_g: list
    forest: corona.StoppingForest
    U: dict
    ctx: forms.FormContext
    ledger: forms.FormLedger


def energy_gamma(sigma, omega, cfg: GridConfig) -> float:
    """Stopping parameter 4 E + 1 with E the squared energy characteristic."""
    e = ch.energy_char(sigma, omega, cfg).value
    return 4.0 * e * e + 1.0


def analyse(inst: Instance, gamma: float | None = None) -> Analysis:
    cfg = inst.cfg
    trunc = hilbert.truncation_ladder(inst.sigma, inst.omega)[-1]
    lam_f = haar_support(inst.f, inst.sigma, cfg)
    lam_g = haar_support(inst.g, inst.omega, cfg)
    gamma = energy_gamma(inst.sigma, inst.omega, cfg) if gamma is None else gamma
    forest = corona.cz_pe_stopping(inst.f, inst.sigma, inst.omega, cfg, gamma=gamma)
    U = {}
    for F in forest.members:
        lg = [J for J in lam_g if forest.corona_of(J) == F]
        U[F] = corona.build_U(F, lg, inst.omega, cfg.theta, cfg)
    ctx = forms.FormContext(inst.f, inst.g, inst.sigma, inst.omega, cfg, trunc, lam_f, lam_g)
    ledger = forms.decompose(ctx, forest, U)
    return Analysis(inst, trunc, lam_f, lam_g, forest, U, ctx, ledger)


# -------------------------------------------------------------- measurements

def _q(num, den):
    return abs(num) / den if den > 0 else None


def measure_constants(inst: Instance, an: Analysis | None = None) -> dict:
    """Measured ratios for the estimated inequalities; a ratio with a zero denominator is omitted."""
    an = analyse(inst) if an is None else an
    s, w, cfg = inst.sigma, inst.omega, inst.cfg
    rep = ch.characteristic_report(s, w, cfg, forest=an.forest)
    nf, ng = an.ctx.norm_f, an.ctx.norm_g
    v = an.ledger.values
    out = {}
    out["neighbour"] = _q(v["neigh"], math.sqrt(rep.a2_offset) * nf * ng)
    out["paraproduct"] = _q(v["para"], rep.testing_fwd * nf * ng)
    stops = [abs(e["stop"]) for e in an.ledger.per_F.values()]
    out["stopping"] = _q(max(stops, default=0.0), rep.pe * nf * ng)
    out["intertwining"] = _q(v["inter"], (rep.func_energy + rep.testing_fwd) * nf * ng)
    out["energy_control"] = _q(rep.energy_fwd, rep.testing_fwd + rep.a2_offset)
    out["weak_vs_offset"] = _q(rep.weak_bdd, rep.a2_offset)
    el = forms.energy_lemma_ratios(an.ctx, an.forest)
    out["energy_lemma"] = max(el) if el else None
    lhs = math.sqrt(rep.a2_hole) + rep.testing_fwd + rep.testing_bwd
    out["theorem_upper"] = _q(lhs, rep.norm)
    out["theorem_lower"] = _q(rep.norm, lhs)
    Mf = maximal_fn(inst.f, s, cfg.root)
    out["maximal"] = _q(math.sqrt(float(np.dot(Mf**2, s.masses))), nf)
    out["qorth"] = corona.quasi_orthogonality(an.forest, inst.f, s)
    return {k: x for k, x in out.items() if x is not None}


def _good_index_bits(rng, n: int, r: int, eps: float, interior: int | None = None, c: float = 2.0):
    """Index k of a random good generation-n interval, built from its finest bit upward.

    The last g bits of k locate J inside its ancestor g levels up, and appending
    bit g-1 only changes that one distance, so each step has a closed-form test.
    interior=s additionally asks the distance to the ancestor s levels up to exceed
    c l(J)^eps l(K)^(1-eps). Returns None when no bit choice survives.
    """
    k = 0
    for g in range(1, n + 1):
        ok = []
        for bit in (0, 1):
            kk = k | (bit << (g - 1))
            far = min(kk, (1 << g) - kk - 1)
            if g >= r and far < 0.5 * 2.0 ** (g * (1.0 - eps)):
                continue
            if g == interior and not far > c * 2.0 ** (g * (1.0 - eps)):
                continue
            ok.append(kk)
        if not ok:
            return None
        k = ok[int(rng.integers(0, len(ok)))]
    return k


DECAY_R = 10  # at eps = 0.1 no interval is good for r below 4, and few are for r below 8


def poisson_decay_samples(count: int = 240, seed: int = 0, eps: float = 0.1, r: int = DECAY_R):
    """Good triples J ⊂ I ⊂ K = [0,1) with J deep inside I; returns (lJ/lI, P(J, mu 1_{K-I}) / P(I, mu 1_{K-I}))."""
    rng = np.random.default_rng(seed)
    cfg = GridConfig(r=r, eps=eps, tau=r + 1, max_depth=60)
    out = []
    tries = 0
    while len(out) < count and tries < 50 * count:
        tries += 1
        dI = int(rng.integers(1, 4))
        s = int(rng.integers(24, 45))
        k = _good_index_bits(rng, dI + s, cfg.r, eps, interior=s)
        if k is None:
            continue
        J = DyadicInterval(dI + s, k)
        I = J.ancestor(dI)
        dist = min(J.left - I.left, I.right - J.right)
        if not (is_good(J, cfg) and dist > 2 * J.length**eps * I.length ** (1 - eps)):
            continue
        pos = rng.uniform(0, 1, int(rng.integers(3, 12)))
        pos = np.unique(pos[(pos < I.left) | (pos >= I.right)])
        if pos.size == 0:
            continue
        mu = DiscreteMeasure(pos, rng.uniform(0.1, 3.0, pos.size))
        b = poisson(I.interval, mu)
        if b > 0:
            out.append((J.length / I.length, poisson(J.interval, mu) / b))
    return out


def decay_fit(samples, exponent: float = 0.7):
    """(slope of the log-log envelope, max of ratio / (lJ/lI)^exponent)."""
    by = {}
    for t, q in samples:
        by[t] = max(by.get(t, 0.0), q)
    ts = np.array(sorted(by))
    qs = np.array([by[t] for t in ts])
    slope = float(np.polyfit(np.log(ts), np.log(qs), 1)[0]) if ts.size >= 2 else float("nan")
    norm = max(q / t**exponent for t, q in samples)
    return slope, norm


# ------------------------------------------------------------------ suites

@dataclass
class SuiteResult:
    suite: str
    seeds: list
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    measured: dict = field(default_factory=dict)
    regressions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"suite": self.suite, "seeds": self.seeds, "passed": self.passed,
                "failures": self.failures, "measured": dict(sorted(self.measured.items())),
                "regressions": self.regressions, "records": self.records}


IDENTITY_TOL = 1e-10


def _identities(seed: int, res: SuiteResult, atoms: int):
    inst = generate(seed, profile_for(seed), atoms=atoms)
    an = analyse(inst)
    L = an.ledger
    res.records.append({"seed": seed, "profile": inst.profile, "residuals": dict(sorted(L.residuals.items())),
                        "values": dict(sorted(L.values.items())), "counts": dict(sorted(L.counts.items()))})
    for k, r in L.residuals.items():
        if not r < IDENTITY_TOL:
            res.failures.append(f"seed {seed}: {k} residual {r:.3e}")


def haar_algebra(f, mu: DiscreteMeasure, cfg: GridConfig) -> dict:
    """Relative errors of reconstruction, orthogonality and Bessel at full resolution."""
    hs = system(mu, cfg.root)
    depth = hs.resolution
    Is = [DyadicInterval(n, k, cfg.root) for n in range(depth) for k in range(1 << n)]
    scale = math.sqrt(float(np.dot(f * f, mu.masses))) or 1.0
    rec = expectation(f, mu, cfg.top()) + project(f, mu, Is)
    diffs = {}
    from .haar import haar_diff
    for I in Is:
        d = haar_diff(f, mu, I)
        if d.coefficient != 0:
            diffs[I] = d.values
    ortho = 0.0
    keys = list(diffs)
    for i, a in enumerate(keys):
        for b in keys[i + 1:]:
            ortho = max(ortho, abs(float(np.dot(diffs[a] * diffs[b], mu.masses))))
    bessel = sum(float(np.dot(v * v, mu.masses)) for v in diffs.values())
    c = f - expectation(f, mu, cfg.top())
    return {"reconstruction": float(np.abs(rec - f).max()) / scale,
            "orthogonality": ortho / scale**2,
            "bessel": abs(bessel - float(np.dot(c * c, mu.masses))) / scale**2}


def coordinate_bessel(omega: DiscreteMeasure, cfg: GridConfig) -> float:
    """Max relative error of sum_{J ⊆ K} ||Delta_J x||^2 = l(K)^2 |K|_w E(K,w)^2 over occupied K."""
    hs = system(omega, cfg.root)
    depth = hs.resolution
    ce = coordinate_energies(omega, cfg.root, depth)
    worst = 0.0
    for n in range(depth + 1):
        for k in np.flatnonzero(hs.masses(n) > 0):
            K = DyadicInterval(n, int(k), cfg.root)
            lhs = sum(e for J, e in ce.items() if K.contains(J))
            rhs = K.length**2 * hs.mass(K) * energy(K.interval, omega)
            scale = max(rhs, K.length**2 * hs.mass(K) * 1e-3)
            worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def _lemmas(seed: int, res: SuiteResult, atoms: int):
    inst = generate(seed, profile_for(seed), atoms=atoms)
    s, w, cfg = inst.sigma, inst.omega, inst.cfg
    alg = haar_algebra(inst.f, s, cfg)
    alg["coordinate_bessel"] = coordinate_bessel(w, cfg)
    for k, v in alg.items():
        tol = 1e-10 if k == "coordinate_bessel" else 1e-12
        if not v < tol:
            res.failures.append(f"seed {seed}: {k} error {v:.3e}")
    an = analyse(inst)
    rep = ch.characteristic_report(s, w, cfg, forest=an.forest)
    if rep.testing_fwd > rep.norm + 1e-8 or rep.testing_bwd > rep.norm + 1e-8:
        res.failures.append(f"seed {seed}: testing exceeds norm")
    # chain refined <= size <= PE^F <= PE on every corona with a U forest
    pe, per_F = ch.pe_characteristic(an.forest, s, w, cfg)
    for F, U in an.U.items():
        lg = [J for J in an.lam_g if an.forest.corona_of(J) == F]
        size = ch.size_functional(F, lg, s, w, an.forest, cfg).value
        coll = U.forest.members
        trip = max((ch.refined_trip_char(coll, A, F, lg, s, w, an.forest, cfg).value for A in coll), default=0.0)
        if not (trip <= size * (1 + 1e-12) + 1e-15 and size <= per_F[F.key] * (1 + 1e-12) + 1e-15
                and per_F[F.key] <= pe.value * (1 + 1e-12) + 1e-15):
            res.failures.append(f"seed {seed}: characteristic chain broken at {F.key}")
    fe = ch.functional_energy(an.forest, s, w, cfg)
    if cfg.r * (1 - cfg.eps) >= 1 and fe.kernel_norm < fe.direct * (1 - 1e-7):
        res.failures.append(f"seed {seed}: enlarged kernel norm below direct functional energy")
    res.records.append({"seed": seed, "haar": alg, "testing_fwd": rep.testing_fwd, "testing_bwd": rep.testing_bwd,
                        "norm": rep.norm, "func_energy": {"direct": fe.direct, "testing": fe.testing_bound,
                                                          "kernel_norm": fe.kernel_norm}})
    for k, v in measure_constants(inst, an).items():
        res.measured[k] = max(res.measured.get(k, 0.0), v)


def _coronas(seed: int, res: SuiteResult, atoms: int):
    inst = generate(seed, profile_for(seed), atoms=atoms)
    s, w, cfg = inst.sigma, inst.omega, inst.cfg
    gamma = energy_gamma(s, w, cfg)
    forest = corona.cz_pe_stopping(inst.f, s, w, cfg, gamma=gamma)
    chk = corona.check_corona(forest, inst.f, s, w, cfg)
    if not chk.ok():
        res.failures.append(f"seed {seed}: corona guarantee failed {chk}")
    cn = corona.carleson_norm(forest, s)
    if cn > 2 + 1e-9:
        res.failures.append(f"seed {seed}: Carleson norm {cn}")
    lam_g = haar_support(inst.g, w, cfg)
    u_rec = []
    for F in forest.members:
        lg = [J for J in lam_g if forest.corona_of(J) == F]
        U = corona.build_U(F, lg, w, cfg.theta, cfg)
        if not U.ok():
            res.failures.append(f"seed {seed}: U[{F.key}] tight {U.tight_worst:.3e} geo {U.geo_worst:.6f}")
        u_rec.append({"F": F.key, "size": len(U.forest), "irreducible": U.irreducible,
                      "tight": U.tight_worst, "geo": U.geo_worst})
    q = corona.quasi_orthogonality(forest, inst.f, s)
    res.measured["qorth"] = max(res.measured.get("qorth", 0.0), q)
    res.records.append({"seed": seed, "gamma": gamma, "members": len(forest), "carleson": cn,
                        "child_mass": chk.child_mass, "average_ratio": chk.average_ratio, "pe_sq": chk.pe_sq,
                        "decay": corona.decay_report(forest, s).rho, "qorth": q, "U": u_rec})


def _theorem(seed: int, res: SuiteResult, atoms: int):
    inst = generate(seed, profile_for(seed), atoms=atoms)
    rep = ch.characteristic_report(inst.sigma, inst.omega, inst.cfg)
    lhs = math.sqrt(rep.a2_hole) + rep.testing_fwd + rep.testing_bwd
    if rep.norm > 0 and not lhs > 0:
        res.failures.append(f"seed {seed}: lower ratio vanishes")
    rec = {"seed": seed, "norm": rep.norm, "a2_hole": rep.a2_hole, "testing_fwd": rep.testing_fwd,
           "testing_bwd": rep.testing_bwd}
    if rep.norm > 0:
        rec["upper"] = lhs / rep.norm
        rec["lower"] = rep.norm / lhs
        res.measured["theorem_upper"] = max(res.measured.get("theorem_upper", 0.0), lhs / rep.norm)
        res.measured["theorem_lower"] = max(res.measured.get("theorem_lower", 0.0), rep.norm / lhs)
    res.records.append(rec)


def tree_oracle_cases(seed: int, per_tree: int = 24, max_nodes: int = 9):
    """(tree, mu) pairs: every mu in {0,1,2}^n for small trees, a seeded sample otherwise."""
    rng = np.random.default_rng(seed)
    import itertools

    for t in corona.all_rooted_trees(max_nodes):
        n = len(t)
        if 3**n <= per_tree * 4:
            mus = [np.array(m) for m in itertools.product((0, 1, 2), repeat=n)]
        else:
            mus = [rng.integers(0, 3, n) for _ in range(per_tree)]
        for mu in mus:
            if np.any(mu > 0):
                yield t, mu


def _tree_oracle(seed: int, res: SuiteResult, gammas=(1.25, 2.0)):
    cases = bad = 0
    for t, mu in tree_oracle_cases(seed):
        for gm in gammas:
            cases += 1
            a = corona.dual_tree_decompose(t, mu, gm)
            sols = corona.dual_tree_bruteforce(t, mu, gm)
            fails = corona.verify_dual_tree(t, mu, gm, a)
            if len(sols) != 1 or sols[0].levels != a.levels or sols[0].irreducible != a.irreducible or fails:
                bad += 1
                if bad <= 5:
                    res.failures.append(f"seed {seed}: tree {t.parents} mu {mu.tolist()} gamma {gm}")
    res.records.append({"seed": seed, "cases": cases, "mismatches": bad})


def parse_seeds(text: str):
    """'a..b' (inclusive), 'a,b,c' or a single integer."""
    text = text.strip()
    if not text:
        return []
    if ".." in text:
        a, b = text.split("..", 1)
        return list(range(int(a), int(b) + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def run_suite(name: str, seeds, atoms: int = 16, baselines: dict | None = None) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    seeds = sorted(seeds)
    res = SuiteResult(name, seeds)
    for seed in seeds:
        if name == "identities":
            _identities(seed, res, atoms)
        elif name == "lemmas":
            _lemmas(seed, res, atoms)
        elif name == "coronas":
            _coronas(seed, res, atoms)
        elif name == "theorem":
            _theorem(seed, res, atoms)
        else:
            _tree_oracle(seed, res)
    if res.measured and baselines is not None:
        res.regressions = regressions(res.measured, baselines)
    return res


# ---------------------------------------------------------------- baselines

def baseline_path() -> Path:
    return Path(str(resources.files("twoweight") / "data" / BASELINE_FILE))


def load_baselines(path: Path | None = None, generate_missing: bool = True) -> dict:
    p = baseline_path() if path is None else Path(path)
    if not p.exists():
        if not generate_missing:
            return {}
        log.warning("baseline file %s missing; measuring seeds %s..%s and writing it",
                    p, BASELINE_SEEDS[0], BASELINE_SEEDS[-1])
        values = measure_suite()
        write_baselines(values, p)
        return values
    return json.loads(p.read_text()).get("constants", {})


def regressions(measured: dict, baselines: dict, factor: float = REGRESSION_FACTOR):
    out = []
    for k, v in sorted(measured.items()):
        b = baselines.get(k)
        if b is not None and v > factor * b:
            out.append({"constant": k, "measured": v, "baseline": b})
    return out


BASELINE_SEEDS = list(range(1, 21))


BASELINE_ATOMS = 32


def measure_suite(seeds=BASELINE_SEEDS, atoms: int = BASELINE_ATOMS) -> dict:
    """Sup over the seed suite of every measured constant, plus the Poisson decay constant."""
    sup = {}
    for seed in seeds:
        inst = generate(seed, profile_for(seed), atoms=atoms)
        for k, v in measure_constants(inst).items():
            sup[k] = max(sup.get(k, 0.0), v)
    slope, norm = decay_fit(poisson_decay_samples())
    sup["poisson_decay"] = norm
    return dict(sorted(sup.items()))


def write_baselines(values: dict, path: Path | None = None):
    p = baseline_path() if path is None else Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    doc = {"version": 1, "seeds": f"{BASELINE_SEEDS[0]}..{BASELINE_SEEDS[-1]}", "atoms": BASELINE_ATOMS,
           "constants": values}
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- run report

@dataclass
class RunReport:
    seed: int
    profile: str
    characteristics: ch.CharacteristicReport
    ledger: forms.FormLedger
    forest: corona.StoppingForest
    carleson: float
    decay: list
    qorth: float
    gamma: float
    ratio: float | None  # (sqrt A2hole + T + T*) / N
    reciprocal: float | None
    timings: dict = field(default_factory=dict)

    def to_json(self, timings: bool = False) -> dict:
        d = {"seed": self.seed, "profile": self.profile, "gamma": self.gamma,
             "characteristics": self.characteristics.to_json(), "forms": self.ledger.to_json(),
             "corona": {"carleson": self.carleson, "decay": self.decay, "qorth": self.qorth,
                        "forest": self.forest.to_json()},
             "theorem": {"ratio": self.ratio, "reciprocal": self.reciprocal}}
        if timings:
            d["timings"] = dict(sorted(self.timings.items()))
        return d

    def to_text(self) -> str:
        c = self.characteristics.to_json()
        rows = [("seed", self.seed), ("profile", self.profile), ("gamma", self.gamma)]
        rows += [(k, v) for k, v in c.items() if k != "witnesses"]
        rows += [(f"form {k}", v) for k, v in sorted(self.ledger.values.items())]
        rows += [("worst residual", self.ledger.worst_residual()), ("carleson", self.carleson),
                 ("qorth", self.qorth), ("theorem ratio", self.ratio), ("theorem reciprocal", self.reciprocal)]
        w = max(len(str(k)) for k, _ in rows)
        lines = [f"{str(k):<{w}}  {_fmt(v)}" for k, v in rows]
        return "\n".join(lines) + "\n\nforest\n" + self.forest.to_text()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return "-" if v is None else str(v)


def run_instance(inst: Instance, gamma: float | None = None, theta: float | None = None) -> RunReport:
    import time

    if theta is not None:
        inst = Instance(inst.sigma, inst.omega, inst.f, inst.g, inst.cfg.replace(theta=theta), inst.seed, inst.profile)
    t = {}
    t0 = time.perf_counter()
    g = energy_gamma(inst.sigma, inst.omega, inst.cfg) if gamma is None else gamma
    an = analyse(inst, gamma=g)
    t["forms"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    rep = ch.characteristic_report(inst.sigma, inst.omega, inst.cfg, forest=an.forest)
    t["characteristics"] = time.perf_counter() - t0
    lhs = math.sqrt(rep.a2_hole) + rep.testing_fwd + rep.testing_bwd
    ratio = lhs / rep.norm if rep.norm > 0 else None
    recip = rep.norm / lhs if rep.norm > 0 and lhs > 0 else None
    return RunReport(inst.seed, inst.profile, rep, an.ledger, an.forest,
                     corona.carleson_norm(an.forest, inst.sigma), corona.decay_report(an.forest, inst.sigma).rho,
                     corona.quasi_orthogonality(an.forest, inst.f, inst.sigma), g, ratio, recip, t)
