"""Credible balls around the empirical Bayes posterior mean and sample-based bands."""
from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chisq import weighted_chisq_quantile
from .eb_inference import empirical_bayes_posterior, log_ratio
from .sequence_model import ModelConfig, Observation, SeedLike, make_rng
from .truths import TruthSequence

from scipy.special import expit


def posterior_variances(alpha: float, cfg: ModelConfig) -> np.ndarray:
    """``kappa_i**-2 / (i**(1+2 alpha) kappa_i**-2 + n)``; free of the data."""
    lr = log_ratio(alpha, cfg)
    return expit(lr) * np.exp(-2.0 * cfg.log_kappa()) / cfg.n


@functools.lru_cache(maxsize=4096)
def _radius_cached(alpha: float, cfg: ModelConfig, method: str) -> float:
    s = posterior_variances(alpha, cfg)
    return math.sqrt(weighted_chisq_quantile(s, 1.0 - cfg.gamma, method=method))


def radius(alpha: float, cfg: ModelConfig, method: str = "imhof") -> float:
    """Radius of the ball around the posterior mean holding posterior mass ``1 - gamma``.

    Infinite at ``alpha == 0``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return math.inf
    return _radius_cached(float(alpha), cfg, method)


@dataclass(frozen=True, eq=False)
class CredibleBall:
    center: np.ndarray
    radius: float
    L: float
    gamma: float
    alpha_used: float

    @property
    def effective_radius(self) -> float:
        return self.L * self.radius


def credible_ball(obs: Observation, cfg: ModelConfig, L: float = 1.0) -> CredibleBall:
    if not L > 0:
        raise ValueError("L must be positive")
    fit, post = empirical_bayes_posterior(obs, cfg)
    return CredibleBall(center=post.mean, radius=radius(fit.alpha_hat, cfg), L=float(L),
                        gamma=cfg.gamma, alpha_used=fit.alpha_hat)


def distance_bound(center: np.ndarray, theta: TruthSequence) -> float:
    """Upper bound on ``||theta - center||``, exact when the tail of ``theta`` is zero.

    Past ``len(center)`` the center is zero; past ``theta.T`` only the tail
    envelope of ``theta`` is known.
    """
    m, T = center.size, theta.T
    c = theta.coeffs
    k = min(m, T)
    d2 = float(np.sum((c[:k] - center[:k]) ** 2))
    if T > m:
        d2 += float(np.sum(c[m:] ** 2)) + theta.tail_sq_norm()
    elif T < m:
        rest = np.abs(center[T:])
        if not theta.tail.is_zero:
            i = np.arange(T + 1, m + 1, dtype=float)
            rest = rest + theta.tail.amplitude * i ** -theta.tail.exponent
            d2 += theta.tail.sq_norm_bound(m)
        d2 += float(np.sum(rest ** 2))
    else:
        d2 += theta.tail_sq_norm()
    return math.sqrt(d2)


def contains(ball: CredibleBall, theta: TruthSequence) -> bool:
    if math.isinf(ball.radius):
        return True
    return distance_bound(ball.center, theta) <= ball.effective_radius


# ------------------------------------------------------------------ bands

def volterra_basis(size: int, t: np.ndarray) -> np.ndarray:
    """``e_i(t) = sqrt(2) cos(pi (i - 1/2) t)``, shape ``(size, len(t))``."""
    i = np.arange(1, size + 1, dtype=float)
    return math.sqrt(2.0) * np.cos(math.pi * np.outer(i - 0.5, t))


@dataclass(frozen=True, eq=False)
class BandSummary:
    t: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    truth: Optional[np.ndarray]
    kept: int
    alpha_hat: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "truth", "mean", "lower", "upper"])
        truth = self.truth if self.truth is not None else np.full(self.t.size, math.nan)
        for row in zip(self.t, truth, self.mean, self.lower, self.upper):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def truth_inside(self) -> np.ndarray:
        if self.truth is None:
            raise ValueError("band has no truth curve")
        return (self.truth >= self.lower) & (self.truth <= self.upper)


def sample_band(obs: Observation, cfg: ModelConfig, draws: int = 2000, keep: float = 0.95,
                grid: np.ndarray | None = None, truth: TruthSequence | None = None,
                seed: SeedLike = 0) -> BandSummary:
    """Pointwise envelope of the posterior draws closest to the posterior mean.

    Draws from the empirical Bayes posterior, keeps the ``keep`` fraction
    nearest the mean in l2, and maps them to functions through the cosine
    eigenbasis of the integration operator.
    """
    if cfg.kappa.kind != "volterra":
        raise NotImplementedError("sample bands are defined for the Volterra operator only")
    if draws < 1 or not 0 < keep <= 1:
        raise ValueError("need draws >= 1 and keep in (0, 1]")
    t = np.linspace(0.0, 1.0, 201) if grid is None else np.asarray(grid, dtype=float)
    fit, post = empirical_bayes_posterior(obs, cfg)
    rng = make_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    sd = np.sqrt(post.var)
    # coordinates whose posterior sd is below 1e-12 of the largest add nothing visible
    m = int(np.max(np.nonzero(sd > 1e-12 * sd.max())[0])) + 1
    m = max(m, int(np.max(np.nonzero(post.mean)[0], initial=0)) + 1)
    basis = volterra_basis(m, t)
    dev = rng.standard_normal((draws, m)) * sd[:m]
    dist = np.einsum("ij,ij->i", dev, dev)
    n_keep = int(round(keep * draws))
    idx = np.argsort(dist, kind="stable")[:n_keep]
    mean_curve = post.mean[:m] @ basis
    curves = mean_curve + dev[idx] @ basis
    truth_curve = None
    if truth is not None:
        c = truth.coeffs
        truth_curve = c @ volterra_basis(c.size, t)
    return BandSummary(t=t, mean=mean_curve, lower=curves.min(axis=0), upper=curves.max(axis=0),
                       truth=truth_curve, kept=n_keep, alpha_hat=fit.alpha_hat)
