"""Stopping-time constructions: the top-down CZ/Poisson-Energy corona, the dual
tree decomposition on finite rooted trees, and the bottom-up coordinate-energy forest."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicInterval, GridConfig, is_good_fast
from .haar import coordinate_energies, system
from .measure import DiscreteMeasure, energy, poisson

log = logging.getLogger(__name__)


class StructureError(RuntimeError):
    pass


# ------------------------------------------------------------------ forests

class StoppingForest:
    """A tree of dyadic intervals under inclusion, rooted at `root`."""

    def __init__(self, root: DyadicInterval, members, alpha=None, tags=None, skipped=(), flags=None):
        ms = set(members) | {root}
        for F in ms:
            if not root.contains(F):
                raise StructureError(f"{F.key} is not inside the root {root.key}")
        self.root = root
        self.members = sorted(ms)
        self._set = frozenset(ms)
        self.alpha = dict(alpha or {})
        self.tags = dict(tags or {})
        self.skipped = list(skipped)
        self.flags = dict(flags or {})
        self.parent = {}
        for F in self.members:
            self.parent[F] = None if F == root else self._up(F, strict=True)
        self._kids = {F: [] for F in self.members}
        for F, P in self.parent.items():
            if P is not None:
                self._kids[P].append(F)

    def __contains__(self, I):
        return I in self._set

    def __len__(self):
        return len(self.members)

    def _up(self, I: DyadicInterval, strict: bool):
        start = I.n - 1 if strict else I.n
        for m in range(start, self.root.n - 1, -1):
            A = I.ancestor(m)
            if A in self._set:
                return A
        return None

    def corona_of(self, I: DyadicInterval):
        """Smallest member containing I, or None outside the root."""
        if not self.root.contains(I):
            return None
        return self._up(I, strict=False)

    def children(self, F):
        return list(self._kids[F])

    def generation(self, F, m: int):
        gen = [F]
        for _ in range(m):
            gen = [c for G in gen for c in self._kids[G]]
        return gen

    def pi(self, I: DyadicInterval, s: int = 0):
        """pi^0 I is the corona top of I; pi^s climbs s further members."""
        F = self.corona_of(I)
        for _ in range(s):
            if F is None:
                return None
            F = self.parent[F]
        return F

    def corona(self, F: DyadicInterval, depth: int):
        """Intervals of D[F] down to the given depth whose corona top is F."""
        out, stack = [], [F]
        while stack:
            K = stack.pop()
            out.append(K)
            if K.n < depth:
                stack.extend(c for c in reversed(K.children()) if c not in self._set)
        out.sort()
        return out

    def to_json(self) -> dict:
        return {
            "root": self.root.key,
            "nodes": [
                {"interval": F.key, "parent": None if self.parent[F] is None else self.parent[F].key,
                 "alpha": self.alpha.get(F), "tag": self.tags.get(F)}
                for F in self.members
            ],
            "skipped": [I.key for I in self.skipped],
            "flags": dict(sorted(self.flags.items())),
        }

    def to_text(self) -> str:
        lines = []

        def walk(F, depth):
            extra = []
            if F in self.alpha:
                extra.append(f"alpha={self.alpha[F]:.6g}")
            if F in self.tags:
                extra.append(self.tags[F])
            lines.append("  " * depth + F.key + ("  " + " ".join(extra) if extra else ""))
            for c in self._kids[F]:
                walk(c, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines)


# ------------------------------------------------------- CZ / PE stopping

def _abs_centered(f, sigma: DiscreteMeasure, I: DyadicInterval):
    """|1_I (f - E_I f)| on sigma atoms, i.e. |P_{D[I]} f| at full resolution."""
    hs = system(sigma, I.root)
    inside = hs.member(I)
    out = np.zeros(len(sigma))
    m = sigma.masses[inside].sum()
    if m > 0:
        avg = np.dot(f[inside], sigma.masses[inside]) / m
        out[inside] = np.abs(f[inside] - avg)
    return out


def _avg(values, sigma: DiscreteMeasure, I: DyadicInterval) -> float:
    hs = system(sigma, I.root)
    inside = hs.member(I)
    m = sigma.masses[inside].sum()
    return float(np.dot(values[inside], sigma.masses[inside]) / m) if m > 0 else 0.0


def pe_sq(I: DyadicInterval, parent_interval: DyadicInterval, sigma, omega) -> float:
    """P(I, 1_{F minus I} sigma)^2 E(I, omega)^2 |I|_omega / |I|_sigma."""
    hs_s, hs_w = system(sigma, I.root), system(omega, I.root)
    ms = hs_s.mass(I)
    if ms <= 0:
        return 0.0
    keep = hs_s.member(parent_interval) & ~hs_s.member(I)
    P = poisson(I.interval, sigma, keep)
    return P * P * energy(I.interval, omega) * hs_w.mass(I) / ms


def cz_pe_stopping(f, sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig,
                   gamma: float | None = None, top: DyadicInterval | None = None) -> StoppingForest:
    """Recursive maximal good intervals where the Poisson-Energy or the average criterion fires."""
    f = np.asarray(f, dtype=float)
    gamma = cfg.gamma if gamma is None else gamma
    T = cfg.top() if top is None else top
    hs = system(sigma, cfg.root)
    if hs.mass(T) <= 0:
        raise ValueError("top interval carries no sigma mass")
    members, tags, skipped = [T], {T: "top"}, []
    parent_of = {T: None}
    queue = [T]
    while queue:
        I = queue.pop(0)
        pf = _abs_centered(f, sigma, I)
        base = _avg(pf, sigma, I)
        stack = list(reversed(I.children())) if I.n < cfg.max_depth else []
        while stack:
            K = stack.pop()
            if hs.mass(K) <= 0:
                skipped.append(K)
                log.debug("skipping %s: no sigma mass", K.key)
                continue
            fired = []
            if is_good_fast(K, cfg):
                if pe_sq(K, I, sigma, omega) > gamma:
                    fired.append("energy")
                if _avg(pf, sigma, K) > 4 * base:
                    fired.append("average")
            if fired:
                members.append(K)
                tags[K] = "+".join(fired)
                parent_of[K] = I
                queue.append(K)
            elif K.n < cfg.max_depth:
                stack.extend(reversed(K.children()))
    forest = StoppingForest(T, members, tags=tags, skipped=sorted(set(skipped)),
                            flags={"gamma": gamma})
    # alpha(F) = sup over members G ⊇ F of E_G |P_{D[parent G]} f|
    local = {}
    for G in forest.members:
        P = forest.parent[G] or G
        local[G] = _avg(_abs_centered(f, sigma, P), sigma, G)
    for F in forest.members:
        a, G = 0.0, F
        while G is not None:
            a = max(a, local[G])
            G = forest.parent[G]
        forest.alpha[F] = a
    return forest


def carleson_norm(forest: StoppingForest, sigma: DiscreteMeasure) -> float:
    hs = system(sigma, forest.root.root)
    best = 0.0
    for S in forest.members:
        ms = hs.mass(S)
        if ms <= 0:
            continue
        tot = sum(hs.mass(F) for F in forest.members if S.contains(F))
        best = max(best, tot / ms)
    return best


@dataclass
class DecayReport:
    rho: list  # rho[m-1] = max over F of the m-th generation mass ratio

    def to_json(self):
        return {"rho": list(self.rho)}


def decay_report(forest: StoppingForest, sigma: DiscreteMeasure) -> DecayReport:
    hs = system(sigma, forest.root.root)
    rho, m = [], 1
    while True:
        vals = []
        for F in forest.members:
            gen = forest.generation(F, m)
            if gen and hs.mass(F) > 0:
                vals.append(sum(hs.mass(G) for G in gen) / hs.mass(F))
        if not vals:
            break
        rho.append(max(vals))
        m += 1
    return DecayReport(rho)


def quasi_orthogonality(forest: StoppingForest, f, sigma: DiscreteMeasure) -> float:
    f = np.asarray(f, dtype=float)
    norm2 = float(np.dot(f * f, sigma.masses))
    if norm2 == 0:
        return 0.0
    hs = system(sigma, forest.root.root)
    return sum(hs.mass(F) * forest.alpha.get(F, 0.0) ** 2 for F in forest.members) / norm2


@dataclass
class CoronaCheck:
    child_mass: float  # max sum of child masses over parent mass
    decay_excess: float  # max of rho_m - 2^-m
    average_ratio: float  # max E_I|P_F f| / E_F|P_F f| over good corona intervals
    pe_sq: float  # max PE_F(I)^2 over good corona intervals
    gamma: float

    def ok(self, tol: float = 1e-12) -> bool:
        return (self.child_mass <= 0.5 + tol and self.decay_excess <= tol
                and self.average_ratio <= 4 + 1e-9 and self.pe_sq <= self.gamma * (1 + 1e-12))


def check_corona(forest: StoppingForest, f, sigma, omega, cfg: GridConfig) -> CoronaCheck:
    """Post-hoc scan of the guarantees of a CZ/PE forest."""
    f = np.asarray(f, dtype=float)
    hs = system(sigma, cfg.root)
    child = 0.0
    for F in forest.members:
        if hs.mass(F) > 0 and forest.children(F):
            child = max(child, sum(hs.mass(G) for G in forest.children(F)) / hs.mass(F))
    rho = decay_report(forest, sigma).rho
    excess = max([r - 2.0 ** -(m + 1) for m, r in enumerate(rho)], default=-1.0)
    avg_ratio, pe_max = 0.0, 0.0
    for F in forest.members:
        pf = _abs_centered(f, sigma, F)
        base = _avg(pf, sigma, F)
        for I in forest.corona(F, cfg.max_depth):
            if not is_good_fast(I, cfg) or hs.mass(I) <= 0:
                continue
            a = _avg(pf, sigma, I)
            if a > 0:
                avg_ratio = max(avg_ratio, a / base if base > 0 else np.inf)
            if I != F:
                pe_max = max(pe_max, pe_sq(I, F, sigma, omega))
    return CoronaCheck(child, float(excess), float(avg_ratio), pe_max, float(forest.flags.get("gamma", cfg.gamma)))


# ------------------------------------------------------------ rooted trees

class RootedTree:
    """Finite rooted tree on nodes 0..n-1 given by a parent array (root has parent -1)."""

    def __init__(self, parents, labels=None):
        self.parents = list(parents)
        n = len(self.parents)
        roots = [i for i, p in enumerate(self.parents) if p < 0]
        if len(roots) != 1:
            raise ValueError("a rooted tree has exactly one root")
        self.root = roots[0]
        self.kids = [[] for _ in range(n)]
        for i, p in enumerate(self.parents):
            if p >= 0:
                self.kids[p].append(i)
        self.labels = list(labels) if labels is not None else list(range(n))
        # postorder and strict-descendant bitmasks
        order, stack = [], [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(self.kids[v])
        if len(order) != n:
            raise ValueError("parent array does not describe a tree")
        self.preorder = order
        self.below = [0] * n
        for v in reversed(order):
            for c in self.kids[v]:
                self.below[v] |= self.below[c] | (1 << c)

    def __len__(self):
        return len(self.parents)

    @property
    def max_children(self) -> int:
        return max(len(k) for k in self.kids)

    def precedes(self, b: int, a: int) -> bool:
        """b strictly below a."""
        return bool(self.below[a] >> b & 1)

    def strict_ancestors(self, v: int):
        out = []
        p = self.parents[v]
        while p >= 0:
            out.append(p)
            p = self.parents[p]
        return out


def istar(tree: RootedTree, mu, a: int) -> float:
    """Sum of mu over a and everything below it."""
    mu = np.asarray(mu, dtype=float)
    return float(mu[a] + sum(mu[b] for b in range(len(tree)) if tree.precedes(b, a)))


def istar_all(tree: RootedTree, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    out = mu.copy()
    for v in reversed(tree.preorder):
        p = tree.parents[v]
        if p >= 0:
            out[p] += out[v]
    return out


@dataclass
class DualTreeResult:
    levels: list  # T_0 .. T_{N+1} as sorted node lists
    irreducible: bool
    new: list = field(default_factory=list)  # elements first chosen at each step
    appended_top: bool = False  # last level is the root, added without the criterion

    @property
    def N(self) -> int:
        return len(self.levels) - 2 if not self.irreducible else 0

    def stopping_set(self):
        return sorted({v for T in self.levels for v in T})


def _below_sums(tree: RootedTree, I, T):
    s = np.zeros(len(tree))
    for b in T:
        for a in tree.strict_ancestors(b):
            s[a] += I[b]
    return s


def dual_tree_decompose(tree: RootedTree, mu, gamma: float) -> DualTreeResult:
    """Grow stopping times upward from the minimal support of mu.

    Step n adds the minimal nodes alpha strictly above T_n with
    I*mu(alpha) > gamma * sum_{beta in T_n below alpha} I*mu(beta), and carries the
    members of T_n not covered by them. Irreducible when the first step finds nothing.
    """
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("node weights must be nonnegative")
    if not np.any(mu > 0):
        raise ValueError("the node measure vanishes identically")
    I = istar_all(tree, mu)
    n = len(tree)
    T0 = sorted(v for v in range(n) if mu[v] > 0 and I[v] == mu[v])
    levels, news = [T0], [T0]
    while True:
        T = levels[-1]
        below = _below_sums(tree, I, T)
        above = {a for b in T for a in tree.strict_ancestors(b)}
        sat = [a for a in above if I[a] > gamma * below[a]]
        if not sat:
            break
        satm = 0
        for a in sat:
            satm |= 1 << a
        new = sorted(a for a in sat if not (tree.below[a] & satm))
        carried = [b for b in T if not any(tree.precedes(b, a) for a in new)]
        levels.append(sorted(new + carried))
        news.append(new)
    if len(levels) == 1:
        return DualTreeResult([T0], True, news)
    if levels[-1] != [tree.root]:
        levels.append([tree.root])
        return DualTreeResult(levels, False, news, appended_top=True)
    return DualTreeResult(levels, False, news)


def _criterion(tree, I, gamma, T, a):
    below = sum(I[b] for b in T if tree.precedes(b, a))
    return I[a] > gamma * below


def verify_dual_tree(tree: RootedTree, mu, gamma: float, res: DualTreeResult, tol: float = 1e-12):
    """Check the three comparison displays and both smallness displays. Returns failures."""
    mu = np.asarray(mu, dtype=float)
    I = istar_all(tree, mu)
    n_nodes = len(tree)
    fails = []
    if res.irreducible:
        T0 = res.levels[0]
        for a in {a for b in T0 for a in tree.strict_ancestors(b)}:
            if _criterion(tree, I, gamma, T0, a):
                fails.append(("irreducible", a))
        return fails
    L = res.levels
    last = len(L) - 1
    for n in range(1, len(L)):
        prev, cur = L[n - 1], L[n]
        covered = 0
        for b in prev:
            covered |= tree.below[b] | (1 << b)
        for a in cur:
            if a in prev:
                continue
            s = sum(I[b] for b in prev if tree.precedes(b, a))
            slack = tol * max(1.0, I[a])
            if n == last and res.appended_top:
                if I[a] > gamma * s + slack:
                    fails.append(("top", n, a))
            elif not I[a] > gamma * s:
                fails.append(("chosen", n, a))
            for g in range(n_nodes):
                if tree.precedes(g, a) and any(tree.precedes(b, g) for b in prev):
                    if _criterion(tree, I, gamma, prev, g):
                        fails.append(("between", n, g))
            outside = tree.below[a] & ~covered
            m_out = sum(mu[v] for v in range(n_nodes) if outside >> v & 1)
            if m_out > (gamma - 1) * s + slack:
                fails.append(("small", n, a))
            for g in range(n_nodes):
                if outside >> g & 1:
                    sg = sum(I[b] for b in prev if tree.precedes(b, g))
                    lhs = I[g] - sum(I[b] for b in prev if tree.precedes(b, g) or b == g)
                    if lhs > (gamma - 1) * sg + slack:
                        fails.append(("small-between", n, g))
    return fails


def dual_tree_bruteforce(tree: RootedTree, mu, gamma: float):
    """Every admissible level sequence by exhaustive antichain search; returns a list of solutions.

    A level T given the previous level P is admissible when: T is an antichain of nodes
    at or above P covering every element of P; every element of T outside P satisfies the
    criterion relative to P; no node strictly between P and an element of T satisfies it;
    every node strictly above P that satisfies it lies at or above a new element of T.
    """
    mu = np.asarray(mu, dtype=float)
    I = istar_all(tree, mu)
    n = len(tree)
    if not np.any(mu > 0):
        raise ValueError("the node measure vanishes identically")
    below = tree.below
    supp = [v for v in range(n) if mu[v] > 0]
    suppm = sum(1 << v for v in supp)
    T0 = [v for v in supp if not (below[v] & suppm)]

    def step(P):
        Pm = sum(1 << b for b in P)
        upper = 0  # nodes strictly above some element of P
        for v in range(n):
            if below[v] & Pm:
                upper |= 1 << v
        sat = 0
        for v in range(n):
            if upper >> v & 1:
                s = sum(I[b] for b in P if below[v] >> b & 1)
                if I[v] > gamma * s:
                    sat |= 1 << v
        cands = [v for v in range(n) if (upper | Pm) >> v & 1]
        sols = []
        for mask in range(1, 1 << len(cands)):
            T = [cands[i] for i in range(len(cands)) if mask >> i & 1]
            Tm = sum(1 << v for v in T)
            if any(below[a] & Tm for a in T):
                continue  # not an antichain
            if any(not any(b == a or below[a] >> b & 1 for a in T) for b in P):
                continue  # coverage
            newm = Tm & ~Pm
            if newm & ~sat:
                continue
            between = 0
            for a in T:
                if newm >> a & 1:
                    between |= below[a] & upper
            if between & sat:
                continue
            ok = True
            for v in range(n):
                if sat >> v & 1 and not any(newm >> a & 1 and (a == v or below[v] >> a & 1) for a in T):
                    ok = False
                    break
            if ok:
                sols.append(sorted(T))
        return sols

    sols, paths = [], [[sorted(T0)]]
    while paths:
        path = paths.pop()
        nxt = [T for T in step(path[-1]) if T != path[-1]]
        if not nxt:
            sols.append(path)
        for T in nxt:
            paths.append(path + [T])
    out = []
    for path in sols:
        if len(path) == 1:
            out.append(DualTreeResult(path, True, []))
        else:
            top = path[-1] != [tree.root]
            out.append(DualTreeResult(path + ([[tree.root]] if top else []), False, [], appended_top=top))
    return out


def all_rooted_trees(max_nodes: int):
    """Every unlabeled rooted tree with at most max_nodes nodes, as parent arrays in preorder."""
    by_size = {1: [()]}  # canonical form: sorted tuple of child forms

    def forests(total, max_form):
        # multisets of trees with `total` nodes, nondecreasing in canonical order, each <= max_form
        if total == 0:
            yield ()
            return
        for size in range(1, total + 1):
            for t in by_size[size]:
                key = (size, t)
                if max_form is not None and key > max_form:
                    continue
                for rest in forests(total - size, key):
                    yield (key,) + rest

    for n in range(2, max_nodes + 1):
        by_size[n] = sorted({tuple(sorted(f)) for f in forests(n - 1, None)})
    out = []
    for n in range(1, max_nodes + 1):
        for form in by_size[n]:
            parents = []

            def emit(fm, p):
                v = len(parents)
                parents.append(p)
                for _, child in fm:
                    emit(child, v)

            emit(form, -1)
            out.append(RootedTree(parents))
    return out


# --------------------------------------------------- coordinate-energy forest

@dataclass
class BuildUResult:
    forest: StoppingForest
    irreducible: bool
    levels: list
    weights: dict
    tight_worst: float = 0.0  # max of lhs - theta*rhs, normalized
    geo_worst: float = 0.0  # max over criterion-chosen U, m of ratio * gamma^m
    appended_top: bool = False  # F itself was added as the last level without the criterion
    geo_root: float = 0.0  # the same ratio at an appended top; reported, not asserted

    def ok(self, tol: float = 1e-10) -> bool:
        return self.irreducible or (self.tight_worst <= tol and self.geo_worst <= 1 + tol)


def build_U(F: DyadicInterval, lam_g, omega: DiscreteMeasure, theta: float, cfg: GridConfig) -> BuildUResult:
    """Dual tree decomposition of J -> ||Delta_J x||^2 on Lambda_g below F with gamma = 1 + theta."""
    gamma = 1.0 + theta
    ce = coordinate_energies(omega, cfg.root, cfg.max_depth)
    weights = {J: ce.get(J, 0.0) for J in lam_g if F.contains(J)}
    weights = {J: w for J, w in weights.items() if w > 0}
    trivial = StoppingForest(F, [F], flags={"irreducible": True})
    if not weights:
        return BuildUResult(trivial, True, [[F]], weights)
    nodes = {F}
    for J in weights:
        for m in range(J.n, F.n - 1, -1):
            nodes.add(J.ancestor(m))
    nodes = sorted(nodes)
    idx = {K: i for i, K in enumerate(nodes)}
    parents = [-1 if K == F else idx[K.ancestor(K.n - 1)] for K in nodes]
    tree = RootedTree(parents, labels=nodes)
    mu = np.array([weights.get(K, 0.0) for K in nodes])
    res = dual_tree_decompose(tree, mu, gamma)
    if res.irreducible:
        return BuildUResult(trivial, True, [[nodes[v] for v in res.levels[0]]], weights)
    members = {nodes[v] for v in res.stopping_set()}
    forest = StoppingForest(F, members, flags={"irreducible": False, "gamma": gamma})
    levels = [[nodes[v] for v in T] for T in res.levels]
    out = BuildUResult(forest, False, levels, weights, appended_top=res.appended_top)
    _verify_U(out, tree, mu, theta, cfg)
    return out


def _verify_U(res: BuildUResult, tree: RootedTree, mu, theta: float, cfg: GridConfig):
    """(tight) and (geometric decay) with sums of mu standing in for squared projections."""
    forest, nodes = res.forest, tree.labels
    gamma = 1.0 + theta
    I = istar_all(tree, mu)
    w = dict(zip(nodes, mu))
    mins = set(res.levels[0])
    corona_of = {K: forest.corona_of(K) for K in nodes}
    tight = -np.inf
    for K in nodes:
        if K in mins or not is_good_fast(K, cfg):
            continue
        U = corona_of[K]
        kids = forest.children(U)
        lhs = sum(w[J] for J in nodes if J != K and K.contains(J) and not any(S.contains(J) for S in kids))
        rhs = I[tree.labels.index(K)]
        if rhs > 0:
            tight = max(tight, (lhs - theta * rhs) / rhs)
    geo = root_geo = 0.0
    cor_mass = {U: sum(w[J] for J in nodes if corona_of[J] == U) for U in forest.members}
    for U in forest.members:
        top = I[tree.labels.index(U)]
        if top <= 0:
            continue
        m, worst = 1, 0.0
        while True:
            gen = forest.generation(U, m)
            if not gen:
                break
            worst = max(worst, sum(cor_mass[V] for V in gen) / top * gamma**m)
            m += 1
        if U == forest.root and res.appended_top:
            root_geo = worst
        else:
            geo = max(geo, worst)
    res.tight_worst = float(tight) if np.isfinite(tight) else 0.0
    res.geo_worst = float(geo)
    res.geo_root = float(root_geo)
