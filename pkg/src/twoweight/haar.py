"""Weighted Haar differences, projections and the dyadic maximal function."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dyadic import DyadicInterval, GridConfig, is_good_fast
from .measure import DiscreteMeasure, Interval

MAX_RESOLUTION = 60


class HaarSystem:
    """Per-depth atom addressing for one measure on one root, with cached masses."""

    def __init__(self, mu: DiscreteMeasure, root: Interval):
        self.mu = mu
        self.root = root
        self._idx: dict[int, np.ndarray] = {}
        self._mass: dict[int, np.ndarray] = {}

    def index(self, n: int) -> np.ndarray:
        """Dyadic index at depth n of every atom, -1 for atoms outside the root."""
        if n not in self._idx:
            size = 1 << n
            length = self.root.length * 2.0**-n
            bounds = self.root.left + np.arange(size + 1) * length
            bounds[-1] = self.root.left + size * length
            k = np.searchsorted(bounds, self.mu.positions, side="right") - 1
            k[(k < 0) | (k >= size)] = -1
            k.setflags(write=False)
            self._idx[n] = k
        return self._idx[n]

    def masses(self, n: int) -> np.ndarray:
        if n not in self._mass:
            k = self.index(n)
            inside = k >= 0
            m = np.bincount(k[inside], weights=self.mu.masses[inside], minlength=1 << n)
            m.setflags(write=False)
            self._mass[n] = m
        return self._mass[n]

    def member(self, I: DyadicInterval) -> np.ndarray:
        if I.n < 0:
            return self.index(0) >= 0
        return self.index(I.n) == I.k

    def mass(self, I: DyadicInterval) -> float:
        if I.n < 0:
            return float(self.masses(0)[0])
        return float(self.masses(I.n)[I.k])

    @cached_property
    def resolution(self) -> int:
        """Smallest depth at which every atom of the root sits alone."""
        for n in range(MAX_RESOLUTION + 1):
            k = self.index(n)
            k = k[k >= 0]
            if k.size == np.unique(k).size:
                return n
        return MAX_RESOLUTION

    def sums(self, n: int, values: np.ndarray) -> np.ndarray:
        k = self.index(n)
        inside = k >= 0
        return np.bincount(k[inside], weights=(values * self.mu.masses)[inside], minlength=1 << n)

    def averages(self, n: int, values: np.ndarray) -> np.ndarray:
        m = self.masses(n)
        s = self.sums(n, values)
        out = np.zeros_like(s)
        np.divide(s, m, out=out, where=m > 0)
        return out


_SYSTEMS: dict = {}


def system(mu: DiscreteMeasure, root: Interval) -> HaarSystem:
    key = (id(mu), root)
    hs = _SYSTEMS.get(key)
    if hs is None or hs.mu is not mu:
        if len(_SYSTEMS) > 256:
            _SYSTEMS.clear()
        hs = HaarSystem(mu, root)
        _SYSTEMS[key] = hs
    return hs


@dataclass
class HaarDifference:
    interval: DyadicInterval
    values: np.ndarray
    coefficient: float

    @property
    def is_zero(self) -> bool:
        return self.coefficient == 0.0


def expectation_flagged(f, mu: DiscreteMeasure, I: DyadicInterval | Interval):
    """(E_I^mu f, zero_mass)."""
    f = np.asarray(f, dtype=float)
    if isinstance(I, DyadicInterval):
        inside = system(mu, I.root).member(I)
    else:
        inside = mu.mask(I)
    m = mu.masses[inside].sum()
    if m <= 0:
        return 0.0, True
    return float(np.dot(f[inside], mu.masses[inside]) / m), False


def expectation(f, mu, I) -> float:
    return expectation_flagged(f, mu, I)[0]


def haar_diff(f, mu: DiscreteMeasure, I: DyadicInterval) -> HaarDifference:
    """Delta_I f = sum over children of 1_child E_child f - 1_I E_I f; zero if a child is empty."""
    f = np.asarray(f, dtype=float)
    hs = system(mu, I.root)
    I0, I1 = I.children()
    in0, in1 = hs.member(I0), hs.member(I1)
    m0 = mu.masses[in0].sum()
    m1 = mu.masses[in1].sum()
    vals = np.zeros(len(mu))
    if m0 <= 0 or m1 <= 0:
        return HaarDifference(I, vals, 0.0)
    e0 = np.dot(f[in0], mu.masses[in0]) / m0
    e1 = np.dot(f[in1], mu.masses[in1]) / m1
    m = m0 + m1
    eI = (m0 * e0 + m1 * e1) / m
    vals[in0] = e0 - eI
    vals[in1] = e1 - eI
    coef = np.sqrt(m0 * m1 / m) * (e1 - e0)
    return HaarDifference(I, vals, float(coef))


def haar_function(mu: DiscreteMeasure, I: DyadicInterval) -> np.ndarray:
    """Normalized h_I^mu = sqrt(m- m+/m)(1_{I+}/m+ - 1_{I-}/m-), zero when a child is empty."""
    hs = system(mu, I.root)
    I0, I1 = I.children()
    in0, in1 = hs.member(I0), hs.member(I1)
    m0, m1 = mu.masses[in0].sum(), mu.masses[in1].sum()
    h = np.zeros(len(mu))
    if m0 <= 0 or m1 <= 0:
        return h
    c = np.sqrt(m0 * m1 / (m0 + m1))
    h[in1] = c / m1
    h[in0] = -c / m0
    return h


def project(f, mu: DiscreteMeasure, H) -> np.ndarray:
    out = np.zeros(len(mu))
    for I in sorted(H):
        out += haar_diff(f, mu, I).values
    return out


def project_local(f, mu: DiscreteMeasure, H, J: DyadicInterval) -> np.ndarray:
    return project(f, mu, [I for I in H if J.contains(I)])


def all_coefficients(f, mu: DiscreteMeasure, root: Interval, depth: int):
    """{I: coefficient} for every interval of depth < depth, vectorized per level."""
    f = np.asarray(f, dtype=float)
    hs = system(mu, root)
    out = {}
    for n in range(depth):
        mc = hs.masses(n + 1)
        sc = hs.sums(n + 1, f)
        m0, m1 = mc[0::2], mc[1::2]
        ok = (m0 > 0) & (m1 > 0)
        if not ok.any():
            continue
        e0 = np.where(ok, sc[0::2] / np.where(ok, m0, 1), 0.0)
        e1 = np.where(ok, sc[1::2] / np.where(ok, m1, 1), 0.0)
        coef = np.sqrt(np.where(ok, m0 * m1 / np.where(ok, m0 + m1, 1), 0.0)) * (e1 - e0)
        for k in np.flatnonzero(ok):
            out[DyadicInterval(n, int(k), root)] = float(coef[k])
    return out


def support_depth(mu: DiscreteMeasure, cfg: GridConfig) -> int:
    return min(cfg.max_depth, system(mu, cfg.root).resolution)


def haar_support(f, mu: DiscreteMeasure, cfg: GridConfig, good: bool = True, rtol: float = 1e-11):
    """Intervals with nonzero difference; with good=True also the interval and both children are good."""
    f = np.asarray(f, dtype=float)
    scale = np.sqrt(np.dot(f * f, mu.masses)) if len(mu) else 0.0
    if scale == 0:
        return []
    coefs = all_coefficients(f, mu, cfg.root, cfg.max_depth)
    out = []
    for I, c in coefs.items():
        if abs(c) <= rtol * scale:
            continue
        if good and not (is_good_fast(I, cfg) and all(is_good_fast(C, cfg) for C in I.children())):
            continue
        out.append(I)
    out.sort()
    return out


def good_haar_grid(mu: DiscreteMeasure, cfg: GridConfig):
    """Intervals whose Haar function is nonzero and which, with both children, are good."""
    hs = system(mu, cfg.root)
    out = []
    for n in range(cfg.max_depth):
        mc = hs.masses(n + 1)
        ok = (mc[0::2] > 0) & (mc[1::2] > 0)
        for k in np.flatnonzero(ok):
            I = DyadicInterval(n, int(k), cfg.root)
            if is_good_fast(I, cfg) and all(is_good_fast(C, cfg) for C in I.children()):
                out.append(I)
    return out


def coordinate_energy(J: DyadicInterval, omega: DiscreteMeasure) -> float:
    """||Delta_J x||^2 in L^2(omega)."""
    hs = system(omega, J.root)
    J0, J1 = J.children()
    in0, in1 = hs.member(J0), hs.member(J1)
    m0, m1 = omega.masses[in0].sum(), omega.masses[in1].sum()
    if m0 <= 0 or m1 <= 0:
        return 0.0
    a0 = np.dot(omega.positions[in0], omega.masses[in0]) / m0
    a1 = np.dot(omega.positions[in1], omega.masses[in1]) / m1
    return float(m0 * m1 / (m0 + m1) * (a1 - a0) ** 2)


def coordinate_energies(omega: DiscreteMeasure, root: Interval, depth: int) -> dict:
    """{J: ||Delta_J x||^2} for all J of depth < depth with both children charged."""
    x = omega.positions
    return {J: c * c for J, c in all_coefficients(x, omega, root, depth).items()}


def maximal_fn(f, mu: DiscreteMeasure, root: Interval | None = None) -> np.ndarray:
    """Dyadic maximal function sup_{I ∋ x} E_I |f| evaluated at each atom."""
    root = Interval(0.0, 1.0) if root is None else root
    a = np.abs(np.asarray(f, dtype=float))
    hs = system(mu, root)
    out = np.zeros(len(mu))
    for n in range(hs.resolution + 1):
        k = hs.index(n)
        avg = hs.averages(n, a)
        inside = k >= 0
        out[inside] = np.maximum(out[inside], avg[k[inside]])
    out[~(hs.index(0) >= 0)] = a[~(hs.index(0) >= 0)]
    return out
