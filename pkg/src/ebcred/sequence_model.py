"""Inverse Gaussian sequence model ``X_i = kappa_i * theta_i + Z_i / sqrt(n)``.

Coordinates are 1-based in the mathematics and 0-based in arrays:
``x[0]`` is ``X_1``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Union

import numpy as np

if TYPE_CHECKING:
    from .truths import TruthSequence

SeedLike = Union[int, np.random.SeedSequence, None]


class TruncationWarning(UserWarning):
    """Truncation shorter than the effective dimension at alpha = 0."""


@dataclass(frozen=True)
class KappaSpec:
    """Singular values of the forward operator.

    ``kind="power"`` gives ``kappa_i = i**-p`` exactly; ``C`` is the envelope
    constant reported to the diagnostics and must be at least 1.
    ``kind="volterra"`` gives ``kappa_i = 1 / ((i - 1/2) * pi)``, certified
    with ``p = 1`` and ``C = pi``.
    """

    kind: str = "power"
    p: float = 0.0
    C: float = 1.0

    def __post_init__(self):
        if self.kind == "volterra":
            object.__setattr__(self, "p", 1.0)
            object.__setattr__(self, "C", math.pi)
        elif self.kind == "power":
            if self.p < 0:
                raise ValueError(f"p must be nonnegative, got {self.p}")
            if self.C < 1:
                raise ValueError(f"envelope constant C must be >= 1, got {self.C}")
        else:
            raise ValueError(f"unknown kappa kind {self.kind!r}")

    @classmethod
    def power(cls, p: float, C: float = 1.0) -> "KappaSpec":
        return cls("power", float(p), float(C))

    @classmethod
    def volterra(cls) -> "KappaSpec":
        return cls("volterra")

    @property
    def label(self) -> str:
        if self.kind == "volterra":
            return "volterra"
        return f"power(p={self.p:g},C={self.C:g})"

    def log_values(self, size: int) -> np.ndarray:
        """``log kappa_i`` for ``i = 1..size``."""
        i = np.arange(1, size + 1, dtype=float)
        if self.kind == "volterra":
            return -np.log((i - 0.5) * math.pi)
        return -self.p * np.log(i)

    def values(self, size: int) -> np.ndarray:
        return np.exp(self.log_values(size))

    def to_dict(self) -> dict:
        if self.kind == "volterra":
            return {"kind": "volterra"}
        return {"kind": "power", "p": self.p, "C": self.C}

    @classmethod
    def from_dict(cls, d) -> "KappaSpec":
        if isinstance(d, str):
            if d == "volterra":
                return cls.volterra()
            raise ValueError(f"unknown kappa spec {d!r}")
        kind = d.get("kind", "power")
        if kind == "volterra":
            return cls.volterra()
        if kind != "power":
            raise ValueError(f"unknown kappa kind {kind!r}")
        extra = set(d) - {"kind", "p", "C"}
        if extra:
            raise ValueError(f"unknown kappa keys {sorted(extra)}")
        return cls.power(d.get("p", 0.0), d.get("C", 1.0))


def make_kappa(spec: KappaSpec, i: int) -> float:
    """Return ``kappa_i`` for a single 1-based index."""
    if i < 1:
        raise ValueError(f"kappa index must be >= 1, got {i}")
    if spec.kind == "volterra":
        return 1.0 / ((i - 0.5) * math.pi)
    return float(i) ** (-spec.p)


def default_trunc(n: float, p: float) -> int:
    """Default series length: ten times the effective dimension at alpha = 0."""
    return max(1000, math.ceil(10.0 * n ** (1.0 / (1.0 + 2.0 * p))))


@dataclass(frozen=True)
class ModelConfig:
    n: float
    kappa: KappaSpec = field(default_factory=KappaSpec)
    A: float = 5.0
    gamma: float = 0.05
    trunc: int = 0  # 0 selects default_trunc(n, p)

    def __post_init__(self):
        if not self.n >= 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")
        if self.trunc == 0:
            object.__setattr__(self, "trunc", default_trunc(self.n, self.kappa.p))
        if self.trunc < 1:
            raise ValueError(f"trunc must be a positive integer, got {self.trunc}")
        need = math.ceil(self.n ** (1.0 / (1.0 + 2.0 * self.kappa.p)) - 1e-9)
        if self.trunc < need:
            warnings.warn(
                f"trunc={self.trunc} is below the alpha=0 effective dimension {need}",
                TruncationWarning,
                stacklevel=3,
            )

    @property
    def p(self) -> float:
        return self.kappa.p

    def with_n(self, n: float, trunc: int | None = None) -> "ModelConfig":
        return ModelConfig(n=n, kappa=self.kappa, A=self.A, gamma=self.gamma,
                           trunc=0 if trunc is None else trunc)

    def log_kappa(self) -> np.ndarray:
        return _cached_log_kappa(self.kappa, self.trunc)

    def to_dict(self) -> dict:
        return {"n": self.n, "kappa": self.kappa.to_dict(), "A": self.A,
                "gamma": self.gamma, "trunc": self.trunc}


_LOG_KAPPA_CACHE: dict = {}


def _cached_log_kappa(spec: KappaSpec, size: int) -> np.ndarray:
    key = (spec, size)
    arr = _LOG_KAPPA_CACHE.get(key)
    if arr is None:
        if len(_LOG_KAPPA_CACHE) > 64:
            _LOG_KAPPA_CACHE.clear()
        arr = spec.log_values(size)
        arr.setflags(write=False)
        _LOG_KAPPA_CACHE[key] = arr
    return arr


@dataclass(frozen=True, eq=False)
class Observation:
    x: np.ndarray
    n: float
    kappa: KappaSpec

    def __len__(self):
        return len(self.x)


def make_rng(seed: SeedLike, *key: int) -> np.random.Generator:
    """Generator for substream ``key`` of a master seed.

    ``make_rng(s, r)`` is the stream of replication ``r``; streams for
    distinct keys are statistically independent.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
        if key:
            ss = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + key)
    else:
        ss = np.random.SeedSequence(seed, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def synthesize(theta0: "TruthSequence", cfg: ModelConfig, seed: SeedLike) -> Observation:
    """Draw one observation of length ``cfg.trunc`` under ``theta0``."""
    size = cfg.trunc
    theta = theta0.padded(size)
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    z = rng.standard_normal(size)
    x = np.exp(cfg.log_kappa()) * theta + z / math.sqrt(cfg.n)
    x.setflags(write=False)
    return Observation(x=x, n=cfg.n, kappa=cfg.kappa)
