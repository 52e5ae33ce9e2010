"""Dyadic grid addressing, goodness, Whitney collections and towers."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .measure import Interval

UNIT = Interval(0.0, 1.0)


class DepthOverflow(ValueError):
    pass


class RootHasNoParent(ValueError):
    pass


class NotContained(ValueError):
    pass


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """[root.left + k l 2^-n, root.left + (k+1) l 2^-n). Negative n with k = 0 are root ancestors."""

    n: int
    k: int
    root: Interval = field(default=UNIT, compare=False)

    def __post_init__(self):
        if self.n >= 0 and not 0 <= self.k < (1 << self.n):
            raise ValueError(f"index {self.k} out of range at depth {self.n}")
        if self.n < 0 and self.k != 0:
            raise ValueError("root ancestors have index 0")

    @property
    def length(self) -> float:
        return self.root.length * 2.0 ** (-self.n)

    @property
    def left(self) -> float:
        return self.root.left + self.k * self.length

    @property
    def right(self) -> float:
        return self.root.left + (self.k + 1) * self.length

    @property
    def center(self) -> float:
        return self.left + 0.5 * self.length

    @property
    def interval(self) -> Interval:
        return Interval(self.left, self.length)

    @property
    def key(self) -> str:
        return f"{self.n}:{self.k}"

    def __repr__(self):
        return f"D({self.n}:{self.k})"

    def children(self):
        return (DyadicInterval(self.n + 1, 2 * self.k, self.root),
                DyadicInterval(self.n + 1, 2 * self.k + 1, self.root))

    def ancestor(self, depth: int) -> "DyadicInterval":
        if depth > self.n:
            raise ValueError("ancestor must be at a coarser depth")
        if depth < 0:
            return DyadicInterval(depth, 0, self.root)
        return DyadicInterval(depth, self.k >> (self.n - depth), self.root)

    def contains(self, other: "DyadicInterval") -> bool:
        """Dyadic inclusion other ⊆ self."""
        if other.n < self.n:
            return False
        if self.n < 0:
            return True
        return (other.k >> (other.n - self.n)) == self.k

    def disjoint(self, other: "DyadicInterval") -> bool:
        return not (self.contains(other) or other.contains(self))


def parse_key(s: str, root: Interval = UNIT) -> DyadicInterval:
    n, k = s.split(":")
    return DyadicInterval(int(n), int(k), root)


@dataclass(frozen=True)
class GridConfig:
    r: int = 3
    eps: float = 0.4
    tau: int = 4
    max_depth: int = 10
    gamma: float = 4.0
    theta: float = 0.25
    tail_doublings: int = 6
    root: Interval = UNIT

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be a positive integer")
        if not 0 < self.eps < 0.5:
            raise ValueError("eps must lie in (0, 1/2)")
        if not self.tau > self.r:
            raise ValueError("tau must exceed r")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not 0 < self.theta < 0.5:
            raise ValueError("theta must lie in (0, 1/2)")

    def top(self) -> DyadicInterval:
        return DyadicInterval(0, 0, self.root)

    def replace(self, **kw) -> "GridConfig":
        d = dict(r=self.r, eps=self.eps, tau=self.tau, max_depth=self.max_depth,
                 gamma=self.gamma, theta=self.theta, tail_doublings=self.tail_doublings,
                 root=self.root)
        d.update(kw)
        return GridConfig(**d)


def children(I: DyadicInterval, max_depth: int | None = None):
    if max_depth is not None and I.n >= max_depth:
        raise DepthOverflow(f"{I.key} is at max depth {max_depth}")
    return I.children()


def parent(I: DyadicInterval) -> DyadicInterval:
    if I.n <= 0:
        raise RootHasNoParent(f"{I.key} has no parent inside the root")
    return DyadicInterval(I.n - 1, I.k >> 1, I.root)


def sibling(K: DyadicInterval) -> DyadicInterval:
    if K.n <= 0:
        raise RootHasNoParent(f"{K.key} has no sibling inside the root")
    return DyadicInterval(K.n, K.k ^ 1, K.root)


def child_containing(I: DyadicInterval, J: DyadicInterval) -> DyadicInterval:
    if not (I.contains(J) and J.n > I.n):
        raise NotContained(f"{J.key} is not strictly inside {I.key}")
    if I.n < 0:
        return DyadicInterval(I.n + 1, 0, I.root)
    return J.ancestor(I.n + 1)


def boundary_distance(J: DyadicInterval, K: DyadicInterval) -> float:
    """Distance from the closure of J to the nearer endpoint of K."""
    return min(abs(J.left - K.left), abs(K.right - J.right))


def _goodness_bound(lJ, lK, eps):
    return 0.5 * lJ**eps * lK ** (1.0 - eps)


def is_good(J: DyadicInterval, cfg: GridConfig) -> bool:
    """d(J, boundary K) >= 1/2 l(J)^eps l(K)^(1-eps) for every ancestor K at least r levels up.

    Both sides are measured in units of l(J): the distance is an integer offset,
    so ties are decided exactly and the answer does not depend on the root.
    """
    return is_good_index(J.n, J.k, cfg.r, cfg.eps)


def goodness_slack(n: int, k: int, r: int, eps: float) -> float:
    """min over ancestors r or more levels up of distance / bound; the interval is good iff this is >= 1."""
    if n < r:
        return np.inf
    g = np.arange(r, n + 1, dtype=np.int64)
    off = np.int64(k) & ((np.int64(1) << g) - 1)
    far = np.minimum(off, (np.int64(1) << g) - off - 1).astype(float)
    return float(np.min(far / (0.5 * np.exp2(g * (1.0 - eps)))))


def is_good_index(n: int, k: int, r: int, eps: float) -> bool:
    """Goodness of the generation-n interval with index k."""
    return goodness_slack(n, k, r, eps) >= 1.0


@lru_cache(maxsize=64)
def _good_table(r: int, eps: float, depth: int):
    table = []
    for n in range(depth + 1):
        k = np.arange(1 << n, dtype=np.int64)
        ok = np.ones(k.size, dtype=bool)
        for g in range(r, n + 1):
            off = k & ((1 << g) - 1)
            ok &= np.minimum(off, (1 << g) - off - 1) >= 0.5 * 2.0 ** (g * (1.0 - eps))
        ok.setflags(write=False)
        table.append(ok)
    return tuple(table)


def good_table(cfg: GridConfig, depth: int | None = None):
    """Per-depth boolean arrays of goodness, depth 0..max_depth (+1 for children)."""
    d = cfg.max_depth + 1 if depth is None else depth
    return _good_table(cfg.r, cfg.eps, d)


def is_good_fast(J: DyadicInterval, cfg: GridConfig) -> bool:
    if J.n < 0:
        return True
    t = good_table(cfg, max(J.n, cfg.max_depth + 1))
    return bool(t[J.n][J.k])


def is_deep_in(W: DyadicInterval, F: DyadicInterval, cfg: GridConfig) -> bool:
    """W ⊂_{r,eps} F: inside, r generations down, and far from the boundary of F."""
    if not F.contains(W) or W.n - F.n < cfg.r:
        return False
    return boundary_distance(W, F) >= _goodness_bound(W.length, F.length, cfg.eps)


@dataclass
class WhitneyResult:
    intervals: list
    truncated: bool
    unresolved: int = 0

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)


def _maximal_scan(F: DyadicInterval, pred, max_depth: int) -> WhitneyResult:
    out, unresolved = [], 0
    stack = [F]
    while stack:
        I = stack.pop()
        if I != F and pred(I):
            out.append(I)
            continue
        if I.n >= max_depth:
            unresolved += 1
            continue
        stack.extend(reversed(I.children()))
    out.sort()
    return WhitneyResult(out, unresolved > 0, unresolved)


def whitney_deep(F: DyadicInterval, cfg: GridConfig) -> WhitneyResult:
    return _maximal_scan(F, lambda W: is_deep_in(W, F, cfg), cfg.max_depth)


def whitney_triple(S: DyadicInterval, cfg: GridConfig) -> WhitneyResult:
    S_iv = S.interval

    def ok(I):
        return is_good_fast(I, cfg) and S_iv.contains_interval(I.interval.expand(3.0))

    return _maximal_scan(S, ok, cfg.max_depth)


def descendants(S: DyadicInterval, generations: int):
    """All dyadic subintervals of S within the given number of generations, S first."""
    out = []
    for g in range(generations + 1):
        base = S.k << g
        out.extend(DyadicInterval(S.n + g, base + j, S.root) for j in range(1 << g))
    return out


def nearby(S: DyadicInterval, tau: int, max_depth: int | None = None):
    if max_depth is not None and S.n + tau > max_depth:
        raise DepthOverflow(f"{S.key} + {tau} generations exceeds depth {max_depth}")
    return descendants(S, tau)


def tower(S: DyadicInterval, A: DyadicInterval):
    """{K : S ⊆ K ⊊ A}, listed from S upward."""
    if not A.contains(S):
        raise NotContained(f"{S.key} is not inside {A.key}")
    return [S.ancestor(m) for m in range(S.n, A.n, -1)]


def upward_chain(S: DyadicInterval, A: DyadicInterval):
    """{I : S ⊊ I ⊆ A}, listed from just above S upward."""
    if not A.contains(S):
        raise NotContained(f"{S.key} is not inside {A.key}")
    return [S.ancestor(m) for m in range(S.n - 1, A.n - 1, -1)]


def grid(cfg: GridConfig, depth: int | None = None, tails: bool = False):
    """All intervals of D[root] to the given depth, optionally preceded by root ancestors."""
    d = cfg.max_depth if depth is None else depth
    root = cfg.root
    out = []
    if tails:
        out.extend(DyadicInterval(-j, 0, root) for j in range(cfg.tail_doublings, 0, -1))
    for n in range(d + 1):
        out.extend(DyadicInterval(n, k, root) for k in range(1 << n))
    return out


def adjacent_pairs(cfg: GridConfig, spread: int, depth: int | None = None):
    """Ordered pairs (Q, Q') of disjoint touching grid intervals with depth difference <= spread."""
    d = cfg.max_depth if depth is None else depth
    root = cfg.root
    pairs = []
    for n in range(d + 1):
        for k in range(1 << n):
            Q = DyadicInterval(n, k, root)
            for n2 in range(max(0, n - spread), min(d, n + spread) + 1):
                # left neighbour: right end at Q.left; right neighbour: left end at Q.right
                for edge, off in ((k, -1), (k + 1, 0)):
                    if n2 >= n:
                        pos = edge << (n2 - n)
                    else:
                        sh = n - n2
                        if edge & ((1 << sh) - 1):
                            continue
                        pos = edge >> sh
                    idx = pos + off
                    if 0 <= idx < (1 << n2):
                        pairs.append((Q, DyadicInterval(n2, idx, root)))
    return pairs
