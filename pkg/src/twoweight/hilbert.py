"""Truncated Hilbert transform on atomic measures and its operator norm."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .measure import DiscreteMeasure

log = logging.getLogger(__name__)


class NonConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class Truncation:
    eps: float
    R: float = math.inf

    def __post_init__(self):
        if not (self.eps > 0 and self.eps < self.R):
            raise ValueError("truncation needs 0 < eps < R")


def kernel_matrix(xs, ys, trunc: Truncation) -> np.ndarray:
    """K[i, j] = 1/(y_j - x_i) on eps < |y - x| < R, else 0."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    d = ys[None, :] - xs[:, None]
    ad = np.abs(d)
    keep = (ad > trunc.eps) & (ad < trunc.R)
    K = np.zeros_like(d)
    np.divide(1.0, d, out=K, where=keep)
    return K


def apply(f, sigma: DiscreteMeasure, x, trunc: Truncation):
    """H(f sigma)(x) with the truncation; vectorized over x."""
    f = np.broadcast_to(np.asarray(f, dtype=float), (len(sigma),))
    scalar = np.ndim(x) == 0
    K = kernel_matrix(np.atleast_1d(x), sigma.positions, trunc)
    out = K @ (f * sigma.masses)
    return float(out[0]) if scalar else out


def bilinear(f, g, sigma: DiscreteMeasure, omega: DiscreteMeasure, trunc: Truncation) -> float:
    """<H(f sigma), g>_omega."""
    g = np.broadcast_to(np.asarray(g, dtype=float), (len(omega),))
    Hf = apply(f, sigma, omega.positions, trunc)
    return float(np.dot(g * omega.masses, Hf))


def weighted_matrix(sigma: DiscreteMeasure, omega: DiscreteMeasure, trunc: Truncation) -> np.ndarray:
    """M[i, j] = sqrt(m_omega_i) sqrt(m_sigma_j) K(x_i, y_j)."""
    K = kernel_matrix(omega.positions, sigma.positions, trunc)
    return np.sqrt(omega.masses)[:, None] * K * np.sqrt(sigma.masses)[None, :]


def power_norm(M: np.ndarray, tol: float = 1e-8, max_iter: int = 2000, seed: int = 0,
               stall: int = 50, max_squarings: int = 8) -> float:
    """Largest singular value by power iteration on the smaller Gram matrix G.

    Stops once the eigen-residual |G v - lam v| is below tol * lam, which puts lam
    within that distance of an eigenvalue of G. Every `stall` steps without
    stopping the iterated operator is squared (at most max_squarings times), so a
    close top pair separates quickly; lam is always the Rayleigh quotient of G.
    """
    if M.size == 0 or not np.any(M):
        return 0.0
    G = M.T @ M if M.shape[1] <= M.shape[0] else M @ M.T
    A = G
    rng = np.random.default_rng(seed)
    v = np.abs(rng.standard_normal(G.shape[0])) + 0.5
    v /= np.linalg.norm(v)
    squarings = 0
    for it in range(1, max_iter + 1):
        w = A @ v
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        Gv = G @ v
        lam = float(np.dot(v, Gv))
        if np.linalg.norm(Gv - lam * v) <= tol * lam:
            return math.sqrt(max(lam, 0.0))
        if it % stall == 0 and squarings < max_squarings:
            A = A @ A
            A /= np.abs(A).max()
            squarings += 1
    raise NonConvergence(f"power iteration did not converge in {max_iter} steps")


def operator_norm(sigma: DiscreteMeasure, omega: DiscreteMeasure, trunc: Truncation,
                  tol: float = 1e-8, seed: int = 0) -> float:
    """N_H(sigma, omega) at one truncation; 0 for a zero measure."""
    if len(sigma) == 0 or len(omega) == 0:
        log.debug("operator_norm: zero measure")
        return 0.0
    return power_norm(weighted_matrix(sigma, omega, trunc), tol=tol, seed=seed)


def min_gap(sigma: DiscreteMeasure, omega: DiscreteMeasure) -> float:
    """Smallest distance between a sigma atom and a distinct omega atom."""
    if len(sigma) == 0 or len(omega) == 0:
        return math.inf
    d = np.abs(omega.positions[:, None] - sigma.positions[None, :])
    d = d[d > 0]
    return float(d.min()) if d.size else math.inf


def truncation_ladder(sigma: DiscreteMeasure, omega: DiscreteMeasure):
    gap = min_gap(sigma, omega)
    if not math.isfinite(gap):
        gap = 1.0
    return [Truncation(gap / 2), Truncation(gap / 4)]


def norm_over_ladder(sigma: DiscreteMeasure, omega: DiscreteMeasure, ladder=None) -> float:
    ladder = truncation_ladder(sigma, omega) if ladder is None else ladder
    return max(operator_norm(sigma, omega, t) for t in ladder)
