"""Finite atomic measures and the scalar functionals built on them."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class Interval:
    """Half-open interval [left, left + length)."""

    left: float
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"interval length must be positive, got {self.length}")

    @property
    def right(self) -> float:
        return self.left + self.length

    @property
    def center(self) -> float:
        return self.left + 0.5 * self.length

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return (x >= self.left) & (x < self.right)

    def expand(self, factor: float) -> "Interval":
        """Concentric dilate, e.g. factor 3 gives the triple."""
        new_len = factor * self.length
        return Interval(self.center - 0.5 * new_len, new_len)

    def contains_interval(self, other: "Interval") -> bool:
        return self.left <= other.left and other.right <= self.right


class DiscreteMeasure:
    """Positive measure with finitely many atoms, positions strictly increasing."""

    __slots__ = ("positions", "masses", "_cum")

    def __init__(self, positions=(), masses=()):
        pos = np.asarray(positions, dtype=float).reshape(-1)
        mas = np.asarray(masses, dtype=float).reshape(-1)
        if pos.shape != mas.shape:
            raise ValueError("positions and masses differ in length")
        if pos.size:
            order = np.argsort(pos, kind="stable")
            pos, mas = pos[order], mas[order]
            if np.any(np.diff(pos) <= 0):
                raise ValueError("atom positions must be distinct")
            if np.any(~(mas > 0)) or not np.all(np.isfinite(mas)):
                raise ValueError("atom masses must be positive and finite")
        pos.setflags(write=False)
        mas.setflags(write=False)
        self.positions = pos
        self.masses = mas
        cum = np.concatenate([[0.0], np.cumsum(mas)])
        cum.setflags(write=False)
        self._cum = cum

    @classmethod
    def from_atoms(cls, atoms):
        atoms = list(atoms)
        if not atoms:
            return cls()
        pos, mas = zip(*atoms)
        return cls(pos, mas)

    def __len__(self):
        return self.positions.size

    def __repr__(self):
        return f"DiscreteMeasure(n={len(self)}, total={self.total:.6g})"

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(
            self.masses, other.masses
        )

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        acc: dict[float, float] = {}
        for x, m in zip(self.positions, self.masses):
            acc[float(x)] = acc.get(float(x), 0.0) + float(m)
        for x, m in zip(other.positions, other.masses):
            acc[float(x)] = acc.get(float(x), 0.0) + float(m)
        return DiscreteMeasure.from_atoms(sorted(acc.items()))

    def scaled(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.positions, c * self.masses)

    def transformed(self, shift: float = 0.0, dilation: float = 1.0) -> "DiscreteMeasure":
        return DiscreteMeasure(dilation * self.positions + shift, self.masses)

    @property
    def total(self) -> float:
        return float(self._cum[-1])

    def span_slice(self, a: float, b: float) -> slice:
        """Index slice of atoms with a <= x < b."""
        lo = int(np.searchsorted(self.positions, a, side="left"))
        hi = int(np.searchsorted(self.positions, b, side="left"))
        return slice(lo, max(lo, hi))

    def mask(self, I: Interval) -> np.ndarray:
        m = np.zeros(len(self), dtype=bool)
        m[self.span_slice(I.left, I.right)] = True
        return m

    def restrict(self, keep: np.ndarray) -> "DiscreteMeasure":
        return DiscreteMeasure(self.positions[keep], self.masses[keep])


def mass(mu: DiscreteMeasure, I: Interval) -> float:
    """|I|_mu over the half-open interval."""
    s = mu.span_slice(I.left, I.right)
    return float(mu._cum[s.stop] - mu._cum[s.start])


def tail_weight(I: Interval, x):
    """l / (l + |x - c|)."""
    return I.length / (I.length + np.abs(np.asarray(x, dtype=float) - I.center))


def poisson_kernel(I: Interval, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return I.length / (I.length + np.abs(y - I.center)) ** 2


def poisson(I: Interval, mu: DiscreteMeasure, weights=None) -> float:
    """P(I, w mu); weights default to 1 and may be a mask or a density."""
    if len(mu) == 0:
        return 0.0
    dens = mu.masses if weights is None else mu.masses * np.asarray(weights, dtype=float)
    return float(np.dot(poisson_kernel(I, mu.positions), dens))


def poisson_outside(I: Interval, mu: DiscreteMeasure, hole: Interval | None = None, within: Interval | None = None) -> float:
    """P(I, 1_{within \\ hole} mu); within=None means all of R, hole=None means I."""
    hole = I if hole is None else hole
    keep = ~mu.mask(hole)
    if within is not None:
        keep &= mu.mask(within)
    return poisson(I, mu, keep)


def energy(J: Interval, omega: DiscreteMeasure) -> float:
    """E(J, omega)^2: normalized variance of omega-positions in J at scale l(J)."""
    s = omega.span_slice(J.left, J.right)
    if s.stop - s.start < 2:
        return 0.0
    x = omega.positions[s]
    w = omega.masses[s]
    tot = w.sum()
    avg = np.dot(w, x) / tot
    var = np.dot(w, (x - avg) ** 2) / tot
    return float(var / J.length**2)


def load_measure(path) -> DiscreteMeasure:
    """Read `position mass` lines; `#` starts a comment."""
    atoms = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'position mass', got {raw!r}")
        atoms.append((float(parts[0]), float(parts[1])))
    return DiscreteMeasure.from_atoms(atoms)


def dump_measure(mu: DiscreteMeasure, path, header: str | None = None):
    lines = [f"# {header}"] if header else []
    lines += [f"{x!r} {m!r}" for x, m in zip(mu.positions.tolist(), mu.masses.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")
