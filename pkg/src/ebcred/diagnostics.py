"""Deterministic functionals of the truth that govern the empirical Bayes procedure.

``h_n`` brackets the likelihood maximizer, the bias/variance pair gives the
mean square error of every posterior mean, and the linear minimax risk over a
hyperrectangle is the benchmark for the rate checks.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from ._optim import grid_refine_max
from .eb_inference import log_ratio
from .sequence_model import ModelConfig
from .truths import TruthSequence

SCAN_POINTS = 2001


def _truth_sq(theta0: TruthSequence, size: int) -> np.ndarray:
    c = theta0.coeffs[:size]
    sq = np.zeros(size)
    sq[: c.size] = c * c
    return sq


def h_n_with_tail(alpha: float, theta0: TruthSequence, cfg: ModelConfig) -> tuple[float, float]:
    """``h_n(alpha)`` summed over the stored coefficients, plus a bound on the omitted tail."""
    if cfg.n < 2:
        raise ValueError("h_n needs n >= 2")
    r = 1.0 + 2.0 * alpha + 2.0 * cfg.p
    T = theta0.T
    i = np.arange(1, T + 1, dtype=float)
    logi = np.log(i)
    log_n = math.log(cfg.n)
    # n^2 i^(1+2a) / (i^r + n)^2 = i^(1+2a) / (1 + i^r / n)^2
    log_q = r * logi - log_n
    w = np.exp((1.0 + 2.0 * alpha) * logi - 2.0 * np.logaddexp(0.0, log_q))
    sq = theta0.coeffs ** 2
    pref = r / (cfg.n ** (1.0 / r) * log_n)
    total = pref * float(np.sum(w * logi * sq))
    tail = 0.0
    if not theta0.tail.is_zero:
        # terms <= n^2 amp^2 log(i) i^-s with s = 1 + 2a + 4p + 2e
        s = 1.0 + 2.0 * alpha + 4.0 * cfg.p + 2.0 * theta0.tail.exponent
        lt = math.log(T)
        tail = pref * cfg.n ** 2 * theta0.tail.amplitude ** 2 * T ** (1 - s) * (lt / (s - 1) + 1 / (s - 1) ** 2)
    return total, tail


def h_n(alpha: float, theta0: TruthSequence, cfg: ModelConfig) -> float:
    return h_n_with_tail(alpha, theta0, cfg)[0]


def h_profile(alphas: np.ndarray, theta0: TruthSequence, cfg: ModelConfig) -> np.ndarray:
    return np.array([h_n(float(a), theta0, cfg) for a in alphas])


def thresholds(cfg: ModelConfig) -> tuple[float, float]:
    C8 = cfg.kappa.C ** 8
    return 1.0 / (16.0 * C8), 8.0 * C8


def alpha_bounds(theta0: TruthSequence, cfg: ModelConfig, points: int = SCAN_POINTS) -> tuple[float, float]:
    """Deterministic lower and upper brackets for the likelihood maximizer.

    Lower: smallest alpha in [0, A] with ``h_n >= 1/(16 C^8)`` (A if none).
    Upper: largest alpha with ``h_n <= 8 C^8`` (0 if none).
    Found by a dense scan and bisection inside the bracketing cell.
    """
    lo_thr, hi_thr = thresholds(cfg)
    grid = np.linspace(0.0, cfg.A, points)
    h = h_profile(grid, theta0, cfg)
    f = lambda a: h_n(a, theta0, cfg)

    above = np.nonzero(h >= lo_thr)[0]
    if above.size == 0:
        a_lo = cfg.A
    elif above[0] == 0:
        a_lo = 0.0
    else:
        k = above[0]
        a_lo = brentq(lambda a: f(a) - lo_thr, grid[k - 1], grid[k], xtol=1e-10)

    below = np.nonzero(h <= hi_thr)[0]
    if below.size == 0:
        a_hi = 0.0
    elif below[-1] == points - 1:
        a_hi = cfg.A
    else:
        k = below[-1]
        a_hi = brentq(lambda a: f(a) - hi_thr, grid[k], grid[k + 1], xtol=1e-10)
    return float(a_lo), float(a_hi)


def bias_variance(alpha: float, theta0: TruthSequence, cfg: ModelConfig) -> tuple[float, float]:
    """Squared bias and expected squared norm of the centered posterior mean at ``alpha``."""
    size = max(cfg.trunc, theta0.T)
    lr = log_ratio(alpha, cfg, size) if size == cfg.trunc else _log_ratio_ext(alpha, cfg, size)
    g = expit(-lr)  # a_i / (a_i + n)
    f = expit(lr)   # n / (a_i + n)
    sq = _truth_sq(theta0, size)
    bias_sq = float(np.sum(g * g * sq)) + theta0.tail_sq_norm()
    log_k = _log_kappa_ext(cfg, size)
    var_sq = float(np.sum(f * f * np.exp(-2.0 * log_k)) / cfg.n)
    return bias_sq, var_sq


def _log_kappa_ext(cfg: ModelConfig, size: int) -> np.ndarray:
    if size <= cfg.trunc:
        return cfg.log_kappa()[:size]
    return cfg.kappa.log_values(size)


def _log_ratio_ext(alpha: float, cfg: ModelConfig, size: int) -> np.ndarray:
    logi = np.log(np.arange(1, size + 1, dtype=float))
    return math.log(cfg.n) + 2.0 * _log_kappa_ext(cfg, size) - (1.0 + 2.0 * alpha) * logi


def oracle_risk(theta0: TruthSequence, cfg: ModelConfig, points: int = SCAN_POINTS) -> tuple[float, float]:
    """Smallest mean square error over posterior means with alpha in [0, A], and its argmin."""
    risk = lambda a: sum(bias_variance(a, theta0, cfg))
    a, neg, _, _ = grid_refine_max(lambda g: np.array([-risk(float(x)) for x in g]),
                                   lambda x: -risk(x), 0.0, cfg.A, points, 1e-6)
    return -neg, a


def minimax_linear_risk(beta: float, M: float, cfg: ModelConfig, with_tail: bool = False):
    """``sum_i M_i s_i / (M_i + s_i)`` with ``M_i = M i**(-1-2beta)``, ``s_i = 1 / (n kappa_i**2)``.

    With ``with_tail`` also returns the bound ``M T**(-2 beta) / (2 beta)`` on
    the terms past the truncation.
    """
    if not (beta > 0 and M > 0):
        raise ValueError("beta and M must be positive")
    T = cfg.trunc
    i = np.arange(1, T + 1, dtype=float)
    Mi = M * i ** (-1.0 - 2.0 * beta)
    si = np.exp(-2.0 * cfg.log_kappa()) / cfg.n
    val = float(np.sum(Mi * si / (Mi + si)))
    if with_tail:
        return val, M * T ** (-2.0 * beta) / (2.0 * beta)
    return val


@dataclass
class DiagnosticsReport:
    n: float
    alphas: list
    h: list
    bias_sq: list
    var_sq: list
    alpha_lower: float
    alpha_upper: float
    oracle_risk: float
    oracle_alpha: float
    minimax_linear: float
    lower_threshold: float
    upper_threshold: float
    thresholds_degenerate: bool
    h_tail_bound: float
    capture_frequency: Optional[float] = None
    alpha_hats: Optional[list] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "DiagnosticsReport":
        return cls(**json.loads(text))


def diagnose(theta0: TruthSequence, cfg: ModelConfig, beta: float = 1.0, M: float = 1.0,
             profile_points: int = 101) -> DiagnosticsReport:
    """Collect h_n, the alpha brackets, the bias/variance curves and both risk benchmarks."""
    alphas = np.linspace(0.0, cfg.A, profile_points)
    h = []
    tail = 0.0
    for a in alphas:
        v, tb = h_n_with_tail(float(a), theta0, cfg)
        h.append(v)
        tail = max(tail, tb)
    bv = [bias_variance(float(a), theta0, cfg) for a in alphas]
    a_lo, a_hi = alpha_bounds(theta0, cfg)
    risk, a_star = oracle_risk(theta0, cfg)
    lo_thr, hi_thr = thresholds(cfg)
    return DiagnosticsReport(
        n=float(cfg.n), alphas=alphas.tolist(), h=h,
        bias_sq=[b for b, _ in bv], var_sq=[v for _, v in bv],
        alpha_lower=a_lo, alpha_upper=a_hi, oracle_risk=risk, oracle_alpha=a_star,
        minimax_linear=minimax_linear_risk(beta, M, cfg),
        lower_threshold=lo_thr, upper_threshold=hi_thr,
        # constants from the proofs: with C > 1 the bracket [1/(16C^8), 8C^8] spans >10 decades
        thresholds_degenerate=bool(hi_thr / lo_thr > 1e4),
        h_tail_bound=tail,
    )
