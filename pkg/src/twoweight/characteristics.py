"""Weight characteristics: Muckenhoupt variants, testing, weak boundedness,
energy, Poisson-Energy, size functional and functional energy."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import hilbert
from .dyadic import (DyadicInterval, GridConfig, adjacent_pairs, grid, is_good_fast,
                     whitney_deep, whitney_triple)
from .haar import coordinate_energies, system
from .measure import DiscreteMeasure


@dataclass
class Sup:
    value: float
    witness: str | None = None

    def __float__(self):
        return float(self.value)


def _argmax(values: np.ndarray, labels) -> Sup:
    if values.size == 0:
        return Sup(0.0, None)
    i = int(np.argmax(values))
    v = float(values[i])
    if not v > 0:
        return Sup(0.0, None)
    return Sup(v, labels[i] if not callable(labels) else labels(i))


class Bank:
    """A fixed list of intervals with vectorized membership and Poisson weights."""

    def __init__(self, intervals):
        self.intervals = list(intervals)
        self.left = np.array([I.left for I in self.intervals])
        self.right = np.array([I.right for I in self.intervals])
        self.length = np.array([I.length for I in self.intervals])
        self.center = self.left + 0.5 * self.length
        self.keys = [I.key for I in self.intervals]
        self.index = {I: i for i, I in enumerate(self.intervals)}
        self._cache = {}

    def __len__(self):
        return len(self.intervals)

    def member(self, mu: DiscreteMeasure) -> np.ndarray:
        key = ("m", id(mu))
        if key not in self._cache:
            x = mu.positions
            self._cache[key] = (x[None, :] >= self.left[:, None]) & (x[None, :] < self.right[:, None])
            self._cache[("mu", id(mu))] = mu
        return self._cache[key]

    def kernel(self, mu: DiscreteMeasure) -> np.ndarray:
        """l/(l+|y-c|)^2 for every (interval, atom)."""
        key = ("p", id(mu))
        if key not in self._cache:
            y = mu.positions
            L = self.length[:, None]
            self._cache[key] = L / (L + np.abs(y[None, :] - self.center[:, None])) ** 2
            self._cache[("mu", id(mu))] = mu
        return self._cache[key]

    def mass(self, mu: DiscreteMeasure) -> np.ndarray:
        return self.member(mu) @ mu.masses

    def poisson_hole(self, mu: DiscreteMeasure) -> np.ndarray:
        """P(I, 1_{R minus I} mu) per interval."""
        return (self.kernel(mu) * ~self.member(mu)) @ mu.masses

    def poisson(self, mu: DiscreteMeasure) -> np.ndarray:
        return self.kernel(mu) @ mu.masses

    def energy_mass(self, omega: DiscreteMeasure) -> np.ndarray:
        """E(I, omega)^2 |I|_omega per interval."""
        M = self.member(omega)
        w = M * omega.masses
        tot = w.sum(1)
        safe = np.where(tot > 0, tot, 1.0)
        avg = (w @ omega.positions) / safe
        var = (w * (omega.positions[None, :] - avg[:, None]) ** 2).sum(1)
        return var / self.length**2


def candidate_bank(cfg: GridConfig, tails: bool = True) -> Bank:
    return Bank(grid(cfg, tails=tails))


# ---------------------------------------------------------------- Muckenhoupt

def a2_offset(sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig) -> Sup:
    """sup over touching grid pairs of comparable length of (|Q'|_w/|Q'|)(|Q|_s/|Q|)."""
    if len(sigma) == 0 or len(omega) == 0:
        return Sup(0.0)
    bank = Bank(grid(cfg))
    pairs = adjacent_pairs(cfg, cfg.r)
    q = np.array([bank.index[a] for a, _ in pairs])
    qp = np.array([bank.index[b] for _, b in pairs])
    dens_s = bank.mass(sigma) / bank.length
    dens_w = bank.mass(omega) / bank.length
    vals = dens_w[qp] * dens_s[q]
    return _argmax(vals, lambda i: f"{pairs[i][0].key}|{pairs[i][1].key}")


def a2_hole(sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig, bank: Bank | None = None) -> Sup:
    bank = candidate_bank(cfg) if bank is None else bank
    t1 = bank.poisson_hole(omega) * bank.mass(sigma) / bank.length if len(omega) and len(sigma) else 0
    t2 = bank.mass(omega) / bank.length * bank.poisson_hole(sigma) if len(omega) and len(sigma) else 0
    vals = np.zeros(len(bank)) + t1 + t2
    return _argmax(vals, bank.keys)


def a2_twotailed(sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig,
                 local_tails: bool = False, bank: Bank | None = None) -> Sup:
    """sup_I (|I|^-1 int s_I^2 d omega)(|I|^-1 int s_I^2 d sigma), tails over R or over I."""
    bank = candidate_bank(cfg) if bank is None else bank
    if len(sigma) == 0 or len(omega) == 0:
        return Sup(0.0)

    def factor(mu):
        s2 = (bank.length[:, None] / (bank.length[:, None] + np.abs(mu.positions[None, :] - bank.center[:, None]))) ** 2
        if local_tails:
            s2 = s2 * bank.member(mu)
        return (s2 @ mu.masses) / bank.length

    return _argmax(factor(omega) * factor(sigma), bank.keys)


# ------------------------------------------------------------------- testing

def _hilbert_of_indicators(bank: Bank, sigma, omega, trunc) -> np.ndarray:
    """H(1_I sigma)(x) for every bank interval I and omega atom x."""
    K = hilbert.kernel_matrix(omega.positions, sigma.positions, trunc)
    return (bank.member(sigma) * sigma.masses) @ K.T


def testing(sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig,
            trunc: hilbert.Truncation, local: bool = False, bank: Bank | None = None) -> Sup:
    """sup_I ||H 1_I sigma||_{L2(omega)} / sqrt|I|_sigma, optionally integrating over I only."""
    if len(sigma) == 0 or len(omega) == 0:
        return Sup(0.0)
    bank = candidate_bank(cfg) if bank is None else bank
    Hv = _hilbert_of_indicators(bank, sigma, omega, trunc)
    if local:
        Hv = Hv * bank.member(omega)
    num = (Hv**2) @ omega.masses
    ms = bank.mass(sigma)
    vals = np.zeros(len(bank))
    np.divide(num, ms, out=vals, where=ms > 0)
    return _argmax(np.sqrt(vals), bank.keys)


def weak_boundedness(sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig,
                     trunc: hilbert.Truncation) -> Sup:
    """sup over touching pairs with lengths within 2^tau of |int_J H(1_I sigma) d omega|."""
    if len(sigma) == 0 or len(omega) == 0:
        return Sup(0.0)
    bank = Bank(grid(cfg))
    Hv = _hilbert_of_indicators(bank, sigma, omega, trunc)
    Jint = bank.member(omega) * omega.masses  # rows: J
    pairs = adjacent_pairs(cfg, cfg.tau)
    a = np.array([bank.index[I] for I, _ in pairs])
    b = np.array([bank.index[J] for _, J in pairs])
    vals = np.abs(np.einsum("ij,ij->i", Hv[a], Jint[b]))
    return _argmax(vals, lambda i: f"{pairs[i][0].key}|{pairs[i][1].key}")


# -------------------------------------------------------------------- energy

def _level_data(mu: DiscreteMeasure, cfg: GridConfig, n: int):
    hs = system(mu, cfg.root)
    return hs.index(n)


def energy_char(sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig,
                depth: int | None = None, scale_by_length: bool = True) -> Sup:
    """Energy characteristic E_2(sigma, omega) by dynamic programming over subpartitions.

    For each top I, val(J) = max(term(J; I), val(J-) + val(J+)) bottom-up, with
    term(J; I) = (P(J, 1_{I minus J} sigma)/l(J))^2 E(J, omega)^2 |J|_omega.
    With scale_by_length=False the Poisson factor is not divided by l(J), which is
    the normalization the stopping criterion uses. Returns the square root of the sup.
    """
    D = cfg.max_depth if depth is None else depth
    if len(sigma) == 0 or len(omega) == 0:
        return Sup(0.0)
    root = cfg.root
    hs_s, hs_w = system(sigma, root), system(omega, root)
    ys, ms = sigma.positions, sigma.masses
    # per level: poisson kernel rows, sigma index, omega variance mass
    lev = []
    for n in range(D + 1):
        size = 1 << n
        ell = root.length * 2.0**-n
        centers = root.left + (np.arange(size) + 0.5) * ell
        ker = ell / (ell + np.abs(ys[None, :] - centers[:, None])) ** 2 * ms[None, :]
        kw = hs_w.index(n)
        inside = kw >= 0
        S0 = hs_w.masses(n)
        S1 = np.bincount(kw[inside], weights=(omega.masses * omega.positions)[inside], minlength=size)
        avg = np.divide(S1, S0, out=np.zeros(size), where=S0 > 0)
        dev = np.zeros(len(omega))
        dev[inside] = (omega.positions[inside] - avg[kw[inside]]) ** 2
        varm = np.bincount(kw[inside], weights=(omega.masses * dev)[inside], minlength=size) / ell**2
        lev.append((ker, hs_s.index(n), varm, ell))
    best_ratio, best_key = 0.0, None
    mass_s = [hs_s.masses(t) for t in range(D + 1)]
    for t in range(D + 1):
        val = None
        for n in range(D, t - 1, -1):
            ker, ks, varm, ell = lev[n]
            size = 1 << n
            if n == t:
                term = np.zeros(size)
            else:
                kt = lev[t][1]
                top_of_J = np.arange(size) >> (n - t)
                same_top = (kt[None, :] == top_of_J[:, None]) & (ks[None, :] != np.arange(size)[:, None])
                P = (ker * same_top).sum(1)
                if scale_by_length:
                    P = P / ell
                term = P * P * varm
            if val is None:
                val = term
            else:
                val = np.maximum(term, val[0::2] + val[1::2])
        ratio = np.divide(val, mass_s[t], out=np.zeros(1 << t), where=mass_s[t] > 0)
        i = int(np.argmax(ratio))
        if ratio[i] > best_ratio:
            best_ratio, best_key = float(ratio[i]), f"{t}:{i}"
    return Sup(math.sqrt(best_ratio), best_key)


# ------------------------------------------------------ forest characteristics

def pe_sq_values(F: DyadicInterval, Is, sigma: DiscreteMeasure, omega: DiscreteMeasure) -> np.ndarray:
    """PE_F(I)^2 = P(I, 1_{F minus I} sigma)^2 E(I, omega)^2 |I|_omega / |I|_sigma."""
    if not Is:
        return np.zeros(0)
    bank = Bank(Is)
    inF = (sigma.positions >= F.left) & (sigma.positions < F.right)
    P = (bank.kernel(sigma) * (inF[None, :] & ~bank.member(sigma))) @ sigma.masses
    ms = bank.mass(sigma)
    em = bank.energy_mass(omega)
    out = np.zeros(len(bank))
    np.divide(P * P * em, ms, out=out, where=ms > 0)
    return out


def _good_charged(Is, sigma, cfg):
    hs = system(sigma, cfg.root)
    return [I for I in Is if is_good_fast(I, cfg) and hs.mass(I) > 0]


def pe_characteristic(forest, sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig):
    """(sup over F of PE^F, {F.key: PE^F}) with the witness interval."""
    per_F = {}
    best = Sup(0.0)
    for F in forest.members:
        Is = _good_charged(forest.corona(F, cfg.max_depth), sigma, cfg)
        v = pe_sq_values(F, Is, sigma, omega)
        s = _argmax(np.sqrt(v), [I.key for I in Is])
        per_F[F.key] = s.value
        if s.value > best.value:
            best = s
    return best, per_F


def _energy_below(Ks, Lam, omega: DiscreteMeasure, cfg: GridConfig) -> np.ndarray:
    ce = coordinate_energies(omega, cfg.root, cfg.max_depth)
    lam = [(J, ce.get(J, 0.0)) for J in Lam]
    return np.array([sum(e for J, e in lam if K.contains(J)) for K in Ks])


def size_functional(F: DyadicInterval, Lam, sigma: DiscreteMeasure, omega: DiscreteMeasure,
                    forest, cfg: GridConfig) -> Sup:
    """sup over good K in the corona of F of |K|_s^-1/2 (P(K, 1_{F-K} s)/l(K)) sqrt(sum_{J in Lam, J ⊆ K} ||Delta_J x||^2)."""
    Lam = list(Lam)
    if not Lam:
        return Sup(0.0)
    Ks = _good_charged(forest.corona(F, cfg.max_depth), sigma, cfg)
    if not Ks:
        return Sup(0.0)
    bank = Bank(Ks)
    inF = (sigma.positions >= F.left) & (sigma.positions < F.right)
    P = (bank.kernel(sigma) * (inF[None, :] & ~bank.member(sigma))) @ sigma.masses
    e = _energy_below(Ks, Lam, omega, cfg)
    vals = P / bank.length * np.sqrt(e) / np.sqrt(bank.mass(sigma))
    return _argmax(vals, bank.keys)


def stopping_children(collection, A: DyadicInterval):
    """Maximal members of the collection strictly inside A."""
    inner = [S for S in collection if S != A and A.contains(S)]
    return sorted(S for S in inner if not any(T != S and T.contains(S) for T in inner))


def refined_trip_char(collection, A: DyadicInterval, F: DyadicInterval, Lam,
                      sigma: DiscreteMeasure, omega: DiscreteMeasure, forest, cfg: GridConfig) -> Sup:
    """Two-level sup over stopping children S of A and K in ({S} ∪ triple-Whitney(S)) ∩ corona(F)."""
    Lam = list(Lam)
    best = Sup(0.0)
    if not Lam:
        return best
    inF = (sigma.positions >= F.left) & (sigma.positions < F.right)
    hs = system(sigma, cfg.root)
    for S in stopping_children(collection, A):
        cands = [S] + list(whitney_triple(S, cfg))
        Ks = [K for K in cands if forest.corona_of(K) == F and is_good_fast(K, cfg) and hs.mass(K) > 0]
        if not Ks:
            continue
        bank = Bank(Ks)
        outS = inF & ~((sigma.positions >= S.left) & (sigma.positions < S.right))
        P = (bank.kernel(sigma) * outS[None, :]) @ sigma.masses
        e = _energy_below(Ks, Lam, omega, cfg)
        vals = P / bank.length * np.sqrt(e) / np.sqrt(bank.mass(sigma))
        s = _argmax(vals, [f"{S.key}/{k}" for k in bank.keys])
        if s.value > best.value:
            best = s
    return best


# --------------------------------------------------------- functional energy

@dataclass
class FunctionalEnergy:
    direct: float
    testing_bound: float
    kernel_norm: float
    rows: int

    @property
    def value(self) -> float:
        return max(self.direct, self.testing_bound)


def _whitney_rows(forest, omega: DiscreteMeasure, cfg: GridConfig):
    """(F, W, c_FW^2, pointwise square function on omega atoms) per deep Whitney piece."""
    ce = all_delta_x(omega, cfg)
    rows = []
    for F in forest.members:
        corona = set(forest.corona(F, cfg.max_depth))
        for W in whitney_deep(F, cfg):
            Js = [J for J in ce if J in corona and W.contains(J)]
            if not Js:
                continue
            sq = np.zeros(len(omega))
            for J in Js:
                sq += ce[J] ** 2
            c2 = float(np.dot(sq, omega.masses))
            if c2 > 0:
                rows.append((F, W, c2, np.sqrt(sq)))
    return rows


def all_delta_x(omega: DiscreteMeasure, cfg: GridConfig) -> dict:
    """{J: Delta_J x as a vector on omega atoms} for J with nonzero difference."""
    from .haar import haar_diff

    out = {}
    for J in coordinate_energies(omega, cfg.root, cfg.max_depth):
        d = haar_diff(omega.positions, omega, J)
        if d.coefficient != 0:
            out[J] = d.values
    return out


def functional_energy_matrices(forest, sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig):
    """(direct map on L2(sigma) -> l2(rows), enlarged positive kernel L2(sigma) -> L2(omega))."""
    rows = _whitney_rows(forest, omega, cfg)
    y, ms = sigma.positions, sigma.masses
    M = np.zeros((len(rows), len(sigma)))
    Khat = np.zeros((len(omega), len(sigma)))
    for i, (F, W, c2, sq) in enumerate(rows):
        decay = 1.0 / (W.length + np.abs(y - W.center)) ** 2
        outside_F = ~((y >= F.left) & (y < F.right))
        M[i] = math.sqrt(c2) * decay * outside_F * np.sqrt(ms)
        W3 = W.interval.expand(3.0)
        outside_W3 = ~((y >= W3.left) & (y < W3.right))
        Khat += sq[:, None] * (decay * outside_W3)[None, :]
    T = np.sqrt(omega.masses)[:, None] * Khat * np.sqrt(ms)[None, :]
    return M, Khat, T


def functional_energy(forest, sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig) -> FunctionalEnergy:
    """Best constant (operator-norm form) in the functional energy inequality for this forest.

    direct: largest singular value of h -> (P(W, h 1_{F^c} sigma)/l(W)) ||P_{C(F) ∩ D[W]} x||.
    testing_bound: max of the two local testing constants of the enlarged kernel operator.
    kernel_norm: operator norm of the enlarged kernel operator, which dominates direct.
    """
    if len(sigma) == 0 or len(omega) == 0:
        return FunctionalEnergy(0.0, 0.0, 0.0, 0)
    M, Khat, T = functional_energy_matrices(forest, sigma, omega, cfg)
    direct = hilbert.power_norm(M) if M.size else 0.0
    knorm = hilbert.power_norm(T) if T.size else 0.0
    bank = Bank(grid(cfg))
    Ms, Mw = bank.member(sigma), bank.member(omega)
    fwd = ((Mw * ((Ms * sigma.masses) @ Khat.T)) ** 2) @ omega.masses
    bwd = ((Ms * ((Mw * omega.masses) @ Khat)) ** 2) @ sigma.masses
    a = np.divide(fwd, bank.mass(sigma), out=np.zeros(len(bank)), where=bank.mass(sigma) > 0)
    b = np.divide(bwd, bank.mass(omega), out=np.zeros(len(bank)), where=bank.mass(omega) > 0)
    tb = math.sqrt(max(float(a.max()), float(b.max()), 0.0))
    return FunctionalEnergy(direct, tb, knorm, M.shape[0])


def kernel_profile(forest, sigma, omega, cfg: GridConfig, samples: int = 64, seed: int = 0):
    """Measured constants for the enlarged kernel: monotone decay away from x and flatness on far intervals."""
    rows = _whitney_rows(forest, omega, cfg)
    if not rows:
        return {"decreasing": 1.0, "flat": 1.0}
    rng = np.random.default_rng(seed)
    ys = np.sort(rng.uniform(cfg.root.left, cfg.root.right, samples))

    def khat(i_x, y):
        tot = np.zeros_like(y)
        for F, W, c2, sq in rows:
            W3 = W.interval.expand(3.0)
            cut = ~((y >= W3.left) & (y < W3.right))
            tot += sq[i_x] * cut / (W.length + np.abs(y - W.center)) ** 2
        return tot

    dec, flat = 1.0, 1.0
    for i_x in range(len(omega)):
        x = omega.positions[i_x]
        kv = khat(i_x, ys)
        for side in (ys > x, ys < x):
            v = kv[side]
            d = np.abs(ys[side] - x)
            order = np.argsort(d)
            v = v[order]
            pos = v > 0
            if pos.sum() >= 2:
                v = v[pos]
                # largest later value relative to an earlier one
                run_min = np.minimum.accumulate(v)
                dec = max(dec, float((v / run_min).max()))
        for I in grid(cfg, depth=min(cfg.max_depth, 6)):
            if abs(x - I.center) < 1.5 * I.length:
                continue
            yy = np.linspace(I.left, I.right, 5, endpoint=False)
            kv = khat(i_x, yy)
            if kv.min() > 0:
                flat = max(flat, float(kv.max() / kv.min()))
    return {"decreasing": dec, "flat": flat}


# -------------------------------------------------------------------- report

@dataclass
class CharacteristicReport:
    a2_offset: float = 0.0
    a2_hole: float = 0.0
    a2_twotailed: float = 0.0
    testing_fwd: float = 0.0
    testing_bwd: float = 0.0
    testing_local: float = 0.0
    weak_bdd: float = 0.0
    energy_fwd: float = 0.0
    energy_bwd: float = 0.0
    pe: float = 0.0
    func_energy: float = 0.0
    norm: float = 0.0
    witnesses: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d["witnesses"] = dict(sorted(self.witnesses.items()))
        return d


def characteristic_report(sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig,
                          trunc_ladder=None, local_tails: bool = False, forest=None) -> CharacteristicReport:
    """Every characteristic; sups over the truncation ladder where a truncation enters."""
    ladder = hilbert.truncation_ladder(sigma, omega) if trunc_ladder is None else trunc_ladder
    bank = candidate_bank(cfg)
    rep = CharacteristicReport()
    w = rep.witnesses

    def put(name, s: Sup):
        setattr(rep, name, float(s.value))
        w[name] = s.witness

    put("a2_offset", a2_offset(sigma, omega, cfg))
    put("a2_hole", a2_hole(sigma, omega, cfg, bank))
    put("a2_twotailed", a2_twotailed(sigma, omega, cfg, local_tails, bank))
    put("testing_fwd", max((testing(sigma, omega, cfg, t, bank=bank) for t in ladder), key=float))
    put("testing_bwd", max((testing(omega, sigma, cfg, t, bank=bank) for t in ladder), key=float))
    put("testing_local", max((testing(sigma, omega, cfg, t, local=True, bank=bank) for t in ladder), key=float))
    put("weak_bdd", max((weak_boundedness(sigma, omega, cfg, t) for t in ladder), key=float))
    put("energy_fwd", energy_char(sigma, omega, cfg))
    put("energy_bwd", energy_char(omega, sigma, cfg))
    rep.norm = hilbert.norm_over_ladder(sigma, omega, ladder)
    if forest is not None:
        pe, _ = pe_characteristic(forest, sigma, omega, cfg)
        put("pe", pe)
        rep.func_energy = functional_energy(forest, sigma, omega, cfg).value
    return rep
