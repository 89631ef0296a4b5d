"""Distribution of ``Q = sum_j w_j Z_j**2`` for positive weights and iid standard normal ``Z_j``.

The CDF is obtained from Imhof's inversion formula

    P(Q > x) = 1/2 + (1/pi) int_0^inf sin(theta(u)) / (u rho(u)) du,
    theta(u) = 1/2 sum_j arctan(w_j u) - x u / 2,
    rho(u)   = prod_j (1 + w_j**2 u**2)**(1/4),

integrated with panel Gauss-Legendre on ``[0, U]``.  ``U`` is chosen from the
bound ``int_U^inf du / (u rho(u)) <= 1 / (rho(U) k(U))`` with
``k(U) = 1/2 sum_j w_j**2 U**2 / (1 + w_j**2 U**2)``, which follows from
convexity of ``t -> log(1 + w**2 U**2 e**(2t))``.  Weights with
``w_j U`` small enter only through power sums (Taylor series).
"""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy.optimize import brentq
from scipy.stats import chi2

log = logging.getLogger(__name__)

TAIL_TOL = 1e-5
SMALL = 0.05
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
MAX_NODES = 20_000_000
MAX_WORK = 200_000_000
MC_DRAWS = 1_000_000


class _ImhofGrid:
    """Imhof integrand pieces precomputed on a node set, for a fixed weight vector."""

    def __init__(self, lam: np.ndarray, y_lo: float, y_hi: float):
        lam = np.sort(lam)[::-1]
        self.lam = lam
        U = self._upper_limit(lam)
        if U is None:
            raise OverflowError("integration range too long")
        big = lam * U > SMALL
        lb, ls = lam[big], lam[~big]
        # phase slope without the -x/2 term is decreasing in u
        slope0 = 0.5 * lam.sum()
        slopeU = 0.5 * np.sum(lam / (1.0 + (lam * U) ** 2))
        freq = 0.5 * max(abs(2 * s - y) for s in (slope0, slopeU) for y in (y_lo, y_hi))
        h = min(1.0, math.pi / max(freq, 1e-300))
        panels = math.ceil(U / h)
        nodes = panels * _GL_X.size
        if nodes > MAX_NODES or nodes * (lb.size + 8) > MAX_WORK:
            raise OverflowError("too many quadrature nodes")
        edges = np.linspace(0.0, U, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        u = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        wq = (half[:, None] * _GL_W[None, :]).ravel()

        atan = np.zeros_like(u)
        logrho = np.zeros_like(u)
        step = max(1, (1 << 21) // max(lb.size, 1))
        for s in range(0, u.size, step):
            z = u[s:s + step, None] * lb[None, :]
            atan[s:s + step] = np.arctan(z).sum(axis=1)
            logrho[s:s + step] = np.log1p(z * z).sum(axis=1)
        if ls.size:
            p = [np.sum(ls ** k) for k in range(1, 9)]
            u2 = u * u
            atan += u * (p[0] - u2 * (p[2] / 3 - u2 * (p[4] / 5 - u2 * p[6] / 7)))
            logrho += u2 * (p[1] - u2 * (p[3] / 2 - u2 * (p[5] / 3 - u2 * p[7] / 4)))
        self.u = u
        self.phase = 0.5 * atan
        self.amp = wq * np.exp(-0.25 * logrho) / u
        self.U = U

    @staticmethod
    def _upper_limit(lam: np.ndarray) -> float | None:
        U = 1.0
        for _ in range(200):
            z2 = (lam * U) ** 2
            logrho = 0.25 * np.log1p(z2).sum()
            k = 0.5 * np.sum(z2 / (1.0 + z2))
            if math.log(math.pi * k) + logrho > -math.log(TAIL_TOL):
                return U
            U *= 1.5
            if U > 1e12:
                return None
        return None

    def cdf(self, y: float) -> float:
        s = np.dot(self.amp, np.sin(self.phase - 0.5 * y * self.u))
        return 0.5 - s / math.pi


def _moments(w: np.ndarray) -> tuple[float, float]:
    return float(w.sum()), math.sqrt(2.0 * float(np.dot(w, w)))


def _clean(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).ravel()
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    w = w[w > 0]
    if w.size == 0:
        raise ValueError("at least one positive weight is required")
    return w


def weighted_chisq_cdf(x: float, weights) -> float:
    """``P(sum w_j Z_j**2 <= x)`` by Imhof inversion."""
    w = _clean(weights)
    if x <= 0:
        return 0.0
    if w.max() - w.min() <= 1e-12 * w.max():
        return float(chi2.cdf(x / w[0], w.size))
    _, sd = _moments(w)
    grid = _ImhofGrid(w / sd, x / sd, x / sd)
    return min(1.0, max(0.0, grid.cdf(x / sd)))


def weighted_chisq_quantile(weights, q: float, method: str = "imhof", seed: int = 0) -> float:
    """The ``q``-quantile of ``sum w_j Z_j**2``.

    ``method="imhof"`` inverts the Imhof CDF by bracketed root finding and
    falls back to Monte Carlo only when the integration range is
    impractically long; ``method="mc"`` uses 10**6 simulated draws.
    """
    if not 0 < q < 1:
        raise ValueError(f"quantile level must lie in (0, 1), got {q}")
    w = _clean(weights)
    if w.max() - w.min() <= 1e-12 * w.max():
        return float(w[0] * chi2.ppf(q, w.size))
    if method == "mc":
        return _mc_quantile(w, q, seed)
    if method != "imhof":
        raise ValueError(f"unknown method {method!r}")
    mean, sd = _moments(w)
    # Cantelli brackets for the quantile, in units of sd
    y_lo = max(0.0, (mean - sd * math.sqrt((1 - q) / q)) / sd)
    y_hi = (mean + sd * math.sqrt(q / (1 - q))) / sd
    try:
        grid = _ImhofGrid(w / sd, y_lo, y_hi)
    except OverflowError:
        log.warning("Imhof integration infeasible for %d weights; using Monte Carlo", w.size)
        return _mc_quantile(w, q, seed)
    f = lambda y: grid.cdf(y) - q
    lo, hi = y_lo, y_hi
    while f(lo) > 0 and lo > 0:
        lo = max(0.0, lo - 0.1)
    while f(hi) < 0:
        hi += 0.1 * (hi - lo) + 0.1
    y = brentq(f, lo, hi, xtol=1e-13 * max(hi, 1.0), rtol=1e-15, maxiter=200)
    return y * sd


def _mc_quantile(w: np.ndarray, q: float, seed: int = 0, draws: int = MC_DRAWS) -> float:
    rng = np.random.default_rng(seed)
    out = np.empty(draws)
    step = max(1, (1 << 23) // w.size)
    for s in range(0, draws, step):
        k = min(step, draws - s)
        z = rng.standard_normal((k, w.size))
        out[s:s + k] = (z * z) @ w
    return float(np.quantile(out, q))
