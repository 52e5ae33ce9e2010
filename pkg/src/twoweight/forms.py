"""Decomposition of <H(f sigma), g>_omega into sub-forms over classified Haar pairs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import hilbert
from .characteristics import refined_trip_char, size_functional, stopping_children
from .corona import BuildUResult, StoppingForest, StructureError
from .dyadic import DyadicInterval, GridConfig, is_good_fast
from .haar import haar_diff, system
from .measure import DiscreteMeasure, poisson

TOP_CLASSES = ("below", "above", "disjoint", "comparable", "comparable_star")


def pair_class(I: DyadicInterval, J: DyadicInterval, tau: int) -> str:
    """Five-way split; J below I means J ⊆ I with l(J) <= 2^-tau l(I)."""
    if I.contains(J):
        return "below" if J.n - I.n >= tau else "comparable"
    if J.contains(I):
        return "above" if I.n - J.n >= tau else "comparable_star"
    return "disjoint"


@dataclass
class PairClasses:
    top: dict  # class -> [(I, J)]
    diag: dict  # F -> below pairs with both ends in the corona of F
    far: list  # below pairs whose ends lie in different coronas

    def counts(self) -> dict:
        out = {k: len(v) for k, v in self.top.items()}
        out["diag"] = sum(len(v) for v in self.diag.values())
        out["far"] = len(self.far)
        return out


def classify_pairs(lam_f, lam_g, forest: StoppingForest, cfg: GridConfig) -> PairClasses:
    top = {c: [] for c in TOP_CLASSES}
    diag, far = {}, []
    for I in sorted(lam_f):
        for J in sorted(lam_g):
            c = pair_class(I, J, cfg.tau)
            top[c].append((I, J))
            if c != "below":
                continue
            FI, FJ = forest.corona_of(I), forest.corona_of(J)
            if FI is None or FJ is None:
                raise StructureError(f"pair {I.key},{J.key} is not covered by the forest")
            if FI == FJ:
                diag.setdefault(FI, []).append((I, J))
            else:
                far.append((I, J))
    return PairClasses(top, diag, far)


class FormContext:
    """Haar differences of f and g with the row vectors R_J = (Delta_J g)^T H restricted to sigma atoms.

    Every form value is R_J . (mask * Delta_I f), a direct double sum over atoms.
    """

    def __init__(self, f, g, sigma: DiscreteMeasure, omega: DiscreteMeasure, cfg: GridConfig,
                 trunc: hilbert.Truncation, lam_f, lam_g):
        self.f = np.asarray(f, dtype=float)
        self.g = np.asarray(g, dtype=float)
        self.sigma, self.omega, self.cfg, self.trunc = sigma, omega, cfg, trunc
        self.lam_f = sorted(lam_f)
        self.lam_g = sorted(lam_g)
        self.hs = system(sigma, cfg.root)
        self.dI = {I: haar_diff(self.f, sigma, I).values for I in self.lam_f}
        K = hilbert.kernel_matrix(omega.positions, sigma.positions, trunc)
        W = omega.masses[:, None] * K * sigma.masses[None, :]
        self.dJ = {J: haar_diff(self.g, omega, J).values for J in self.lam_g}
        self.R = {J: self.dJ[J] @ W for J in self.lam_g}
        self.norm_f = math.sqrt(float(np.dot(self.f**2, sigma.masses)))
        self.norm_g = math.sqrt(float(np.dot(self.g**2, omega.masses)))

    def mask(self, I: DyadicInterval) -> np.ndarray:
        return self.hs.member(I)

    def side_value(self, I: DyadicInterval, C: DyadicInterval) -> float:
        """E_C Delta_I f for a child C of I (Delta_I f is constant there)."""
        m = self.mask(C)
        return float(self.dI[I][m][0]) if m.any() else 0.0

    def pair(self, I, J, mask=None) -> float:
        v = self.dI[I] if mask is None else self.dI[I] * mask
        return float(np.dot(self.R[J], v))

    def total(self) -> float:
        return hilbert.bilinear(self.f, self.g, self.sigma, self.omega, self.trunc)


def form_value(ctx: FormContext, pairs, mode: str = "full", F: DyadicInterval | None = None) -> float:
    """Sum over pairs of <H(indicator * Delta_I f), Delta_J g>.

    modes: full; home (1 on the child of I containing J); neigh (the other child);
    para ((E_{I_J} Delta_I f) 1_F); stop (-(E_{I_J} Delta_I f) 1_{F minus I_J}).
    """
    tot = 0.0
    for I, J in pairs:
        if mode == "full":
            tot += ctx.pair(I, J)
            continue
        IJ = J.ancestor(I.n + 1)
        if mode == "home":
            tot += ctx.pair(I, J, ctx.mask(IJ))
        elif mode == "neigh":
            other = DyadicInterval(IJ.n, IJ.k ^ 1, IJ.root)
            tot += ctx.pair(I, J, ctx.mask(other))
        elif mode == "para":
            tot += ctx.side_value(I, IJ) * float(np.dot(ctx.R[J], ctx.mask(F)))
        elif mode == "stop":
            hole = ctx.mask(F) & ~ctx.mask(IJ)
            tot -= ctx.side_value(I, IJ) * float(np.dot(ctx.R[J], hole))
        else:
            raise ValueError(f"unknown mode {mode!r}")
    return tot


def ntv_reach_split(F, ctx: FormContext, classes: PairClasses):
    """(para, stop, diag) for the corona of F, each summed independently."""
    pairs = classes.diag.get(F, [])
    return (form_value(ctx, pairs, "para", F), form_value(ctx, pairs, "stop", F),
            form_value(ctx, pairs, "home"))


# ---------------------------------------------------------------- paraproduct

@dataclass
class Paraproduct:
    lam: dict  # J -> lambda_J
    telescoped: dict  # J -> E_{I(J)_J} f - E_F f, 0 when no qualifying I
    pair_value: float
    recomputed: float
    lam_over_alpha: float
    unqualified: list = field(default_factory=list)


def paraproduct_coefficients(F, ctx: FormContext, forest: StoppingForest, classes: PairClasses) -> Paraproduct:
    cfg, sigma = ctx.cfg, ctx.sigma
    lam = {}
    for I, J in classes.diag.get(F, []):
        lam[J] = lam.get(J, 0.0) + ctx.side_value(I, J.ancestor(I.n + 1))
    Js = [J for J in ctx.lam_g if forest.corona_of(J) == F]
    tele, unq = {}, []
    EF = _avg(ctx.f, sigma, ctx.hs, F)
    for J in Js:
        lam.setdefault(J, 0.0)
        # smallest I in the corona and in the support with J ⊂_tau I
        cands = [I for I in ctx.lam_f if forest.corona_of(I) == F and I.contains(J) and J.n - I.n >= cfg.tau]
        if not cands:
            tele[J] = 0.0
            unq.append(J)
            continue
        Inat = max(cands, key=lambda I: I.n)
        tele[J] = _avg(ctx.f, sigma, ctx.hs, J.ancestor(Inat.n + 1)) - EF
    pair_value = form_value(ctx, classes.diag.get(F, []), "para", F)
    comb = np.zeros(len(ctx.omega))
    for J in Js:
        comb += lam[J] * ctx.dJ[J]
    H1F = hilbert.apply(ctx.mask(F).astype(float), sigma, ctx.omega.positions, ctx.trunc)
    recomputed = float(np.dot(H1F * comb, ctx.omega.masses))
    a = forest.alpha.get(F, 0.0)
    big = max((abs(v) for v in lam.values()), default=0.0)
    ratio = big / a if a > 0 else (0.0 if big == 0 else math.inf)
    return Paraproduct(lam, tele, pair_value, recomputed, ratio, unq)


def _avg(values, mu, hs, I) -> float:
    m = hs.member(I)
    tot = mu.masses[m].sum()
    return float(np.dot(values[m], mu.masses[m]) / tot) if tot > 0 else 0.0


# --------------------------------------------------------------- intertwining

@dataclass
class Intertwining:
    inter: float
    far: float
    difference: float  # far - inter by subtraction
    difference_display: float  # the same by its own pair sum
    constancy: float  # max spread of f_F over the atoms of F


def intertwining(ctx: FormContext, forest: StoppingForest, classes: PairClasses) -> Intertwining:
    tau = ctx.cfg.tau
    inter = disp = spread = 0.0
    for F in forest.members:
        Js = [J for J in ctx.lam_g if forest.corona_of(J) == F]
        above = [I for I in ctx.lam_f if I.contains(F) and I != F]
        fF = np.zeros(len(ctx.sigma))
        for I in above:
            m = ctx.mask(F.ancestor(I.n + 1))
            fF += ctx.dI[I] * m
            for J in Js:
                v = ctx.pair(I, J, m)
                inter += v
                if J.n - I.n < tau:
                    disp -= v
        onF = ctx.mask(F)
        if onF.any():
            spread = max(spread, float(np.ptp(fF[onF])))
    far = form_value(ctx, classes.far, "home")
    return Intertwining(inter, far, far - inter, disp, spread)


# --------------------------------------------------------- stopping children

@dataclass
class StoppingChild:
    A: DyadicInterval
    value: float
    alpha: dict  # S -> alpha_A(S)
    phi_constant: float  # max |phi_J^S| / alpha_A(S)
    phi_on_S: float  # max |phi_J^S| on S, zero by construction
    trip: float
    bound_constant: float  # |B| / (trip sqrt(sum |S| alpha^2) ||g||)


def stopping_child_form(collection, A, F, ctx: FormContext, forest: StoppingForest, lam_g_F) -> StoppingChild:
    cfg, hs = ctx.cfg, ctx.hs
    kids = stopping_children(collection, A)
    lam_f_F = [I for I in ctx.lam_f if forest.corona_of(I) == F]
    lam_g_F = sorted(lam_g_F)
    value, alpha = 0.0, {}
    phi_c = phi_S = 0.0
    mF = ctx.mask(F)
    for S in kids:
        tower = [I for I in lam_f_F if I.contains(S) and I != S and A.contains(I)]
        supp_above = [I for I in ctx.lam_f if I.contains(S)]
        a = 0.0
        if supp_above:
            base = max(supp_above, key=lambda I: I.n)
            for m in range(base.n, A.n - 1, -1):
                K = S.ancestor(m)
                if A.contains(K) and is_good_fast(K, cfg):
                    a = max(a, abs(_avg(ctx.f, ctx.sigma, hs, K)))
        alpha[S] = a
        hole_S = (mF & ~ctx.mask(S)).astype(float)
        for J in lam_g_F:
            if not S.contains(J):
                continue
            coef = 0.0
            phi = np.zeros(len(ctx.sigma))
            for I in tower:
                if J.n - I.n < cfg.tau:
                    continue
                IJ = J.ancestor(I.n + 1)
                e = ctx.side_value(I, IJ)
                coef += e
                phi += e * (mF & ~ctx.mask(IJ))
            value += coef * float(np.dot(ctx.R[J], hole_S))
            big = float(np.abs(phi).max()) if phi.size else 0.0
            phi_S = max(phi_S, float(np.abs(phi[ctx.mask(S)]).max()) if ctx.mask(S).any() else 0.0)
            if big > 0:
                phi_c = max(phi_c, big / a if a > 0 else math.inf)
    trip = refined_trip_char(collection, A, F, lam_g_F, ctx.sigma, ctx.omega, forest, cfg).value
    weight = math.sqrt(sum(hs.mass(S) * alpha[S] ** 2 for S in kids))
    den = trip * weight * ctx.norm_g
    bound = abs(value) / den if den > 0 else (0.0 if value == 0 else math.inf)
    return StoppingChild(A, value, alpha, phi_c, phi_S, trip, bound)


# ---------------------------------------------------------------- stop split

@dataclass
class StopSplit:
    F: DyadicInterval
    stop: float
    diagstop: float
    farstop: float
    per_U: dict  # U -> diagstop contribution
    minimal_U: float  # largest |contribution| from minimal members
    size: float
    theta: float  # |stop| / (size ||f|| ||g||)
    diag_ratio: float
    far_ratio: float

    @property
    def implied_bound(self) -> float:
        """2C/(1 - theta) with 2C read off as the larger of the two measured ratios."""
        return 2 * max(self.diag_ratio, self.far_ratio) / (1 - self.theta_param)

    theta_param: float = 0.25


def stop_decompose(F, ctx: FormContext, forest: StoppingForest, classes: PairClasses, U: BuildUResult) -> StopSplit:
    pairs = classes.diag.get(F, [])
    Uf = U.forest
    diag, far, per_U = [], [], {}
    for I, J in pairs:
        UI, UJ = Uf.corona_of(I), Uf.corona_of(J)
        if UI == UJ:
            diag.append((I, J))
            per_U[UI] = per_U.get(UI, 0.0) + form_value(ctx, [(I, J)], "stop", F)
        else:
            far.append((I, J))
    stop = form_value(ctx, pairs, "stop", F)
    ds = form_value(ctx, diag, "stop", F)
    fs = form_value(ctx, far, "stop", F)
    mins = set(U.levels[0]) if not U.irreducible else set()
    min_c = max((abs(v) for W, v in per_U.items() if W in mins), default=0.0)
    lam_g_F = [J for J in ctx.lam_g if forest.corona_of(J) == F]
    size = size_functional(F, lam_g_F, ctx.sigma, ctx.omega, forest, ctx.cfg).value
    den = size * ctx.norm_f * ctx.norm_g

    def q(v):
        return abs(v) / den if den > 0 else (0.0 if v == 0 else math.inf)

    return StopSplit(F, stop, ds, fs, per_U, min_c, size, q(stop), q(ds), q(fs), ctx.cfg.theta)


# ---------------------------------------------------------- energy lemma

def energy_lemma_ratios(ctx: FormContext, forest: StoppingForest, limit: int = 64):
    """|<H 1_{F minus I'} sigma, Delta_J g>| / ((P(J, 1_{F minus I'} sigma)/l(J)) ||Delta_J x|| ||Delta_J g||)
    over good J ⊂_tau I' with 2I' ⊆ F."""
    from .haar import coordinate_energy

    cfg, sigma, omega = ctx.cfg, ctx.sigma, ctx.omega
    out = []
    for J in ctx.lam_g:
        F = forest.corona_of(J)
        if F is None or not is_good_fast(J, cfg):
            continue
        for m in range(J.n - cfg.tau, F.n, -1):
            Ip = J.ancestor(m)
            dbl = Ip.interval.expand(2.0)
            if not F.interval.contains_interval(dbl):
                continue
            hole = ctx.mask(F) & ~ctx.mask(Ip)
            lhs = abs(float(np.dot(ctx.R[J], hole)))
            P = poisson(J.interval, sigma, hole)
            ex = math.sqrt(coordinate_energy(J, omega))
            ng = math.sqrt(float(np.dot(ctx.dJ[J] ** 2, omega.masses)))
            rhs = P / J.length * ex * ng
            if rhs > 0:
                out.append(lhs / rhs)
            if len(out) >= limit:
                return out
    return out


# ------------------------------------------------------------------- ledger

@dataclass
class FormLedger:
    values: dict
    counts: dict
    residuals: dict
    per_F: dict
    ratios: dict

    def to_json(self) -> dict:
        return {"values": dict(sorted(self.values.items())), "counts": dict(sorted(self.counts.items())),
                "residuals": dict(sorted(self.residuals.items())), "per_F": self.per_F,
                "ratios": dict(sorted(self.ratios.items()))}

    def worst_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _rel(a, b, scale) -> float:
    return abs(a - b) / scale


def decompose(ctx: FormContext, forest: StoppingForest, U_by_F: dict) -> FormLedger:
    """All sub-forms with every identity residual, relative to the largest magnitude involved."""
    classes = classify_pairs(ctx.lam_f, ctx.lam_g, forest, ctx.cfg)
    v = {c: form_value(ctx, classes.top[c]) for c in TOP_CLASSES}
    below = classes.top["below"]
    v["total"] = ctx.total()
    v["home"] = form_value(ctx, below, "home")
    v["neigh"] = form_value(ctx, below, "neigh")
    v["far"] = form_value(ctx, classes.far, "home")
    para = stop = diag = diagstop = farstop = 0.0
    per_F, stop_split = {}, []
    res = {}
    for F in forest.members:
        p, s, d = ntv_reach_split(F, ctx, classes)
        para, stop, diag = para + p, stop + s, diag + d
        entry = {"para": p, "stop": s, "diag": d}
        if F in U_by_F:
            sp = stop_decompose(F, ctx, forest, classes, U_by_F[F])
            diagstop += sp.diagstop
            farstop += sp.farstop
            entry.update(diagstop=sp.diagstop, farstop=sp.farstop, theta=sp.theta)
            sc = max(abs(sp.stop), abs(sp.diagstop), abs(sp.farstop), 1e-300)
            res[f"stop_split:{F.key}"] = _rel(sp.stop, sp.diagstop + sp.farstop, sc)
            res[f"minimal_U:{F.key}"] = sp.minimal_U / max(sc, abs(sp.minimal_U), 1e-300)
            stop_split.append(sp)
        if classes.diag.get(F):
            per_F[F.key] = entry
    v.update(para=para, stop=stop, diag=diag, diagstop=diagstop, farstop=farstop)
    it = intertwining(ctx, forest, classes)
    v["inter"] = it.inter
    v["far_minus_inter"] = it.difference_display
    sc = _scale(ctx, v)
    res["partition"] = _rel(sum(v[c] for c in TOP_CLASSES), v["total"], sc)
    res["home_neigh"] = _rel(v["home"] + v["neigh"], v["below"], sc)
    res["diag_far"] = _rel(v["diag"] + v["far"], v["home"], sc)
    res["para_stop"] = _rel(v["para"] + v["stop"], v["diag"], sc)
    res["diagstop_farstop"] = _rel(v["diagstop"] + v["farstop"], v["stop"], sc)
    res["far_inter"] = _rel(it.far - it.inter, it.difference_display, sc)
    res["f_F_constant"] = it.constancy / max(ctx.norm_f, 1e-300) if ctx.norm_f else 0.0
    ratios = {"theta_max": max((sp.theta for sp in stop_split), default=0.0)}
    return FormLedger(v, classes.counts(), res, per_F, ratios)


def _scale(ctx: FormContext, values=None) -> float:
    """Normalization for residuals: the largest form magnitude involved."""
    s = max((abs(x) for x in (values or {}).values()), default=0.0)
    return max(s, 1e-300)
