"""True parameter sequences and membership checks for regularity classes."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .sequence_model import SeedLike, make_rng


class UndecidableError(ValueError):
    """A class-membership question cannot be settled at the given truncation."""


@dataclass(frozen=True)
class Tail:
    """Behaviour of a sequence beyond its stored coefficients.

    ``kind="zero"`` means exactly zero.  ``kind="power"`` is an envelope
    ``|theta_i| <= amplitude * i**-exponent`` for every ``i`` past the
    truncation.
    """

    kind: str = "zero"
    amplitude: float = 0.0
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind == "power" and not self.exponent > 0.5:
            raise ValueError("power tail exponent must exceed 1/2 for square summability")
        if self.kind not in ("zero", "power"):
            raise ValueError(f"unknown tail kind {self.kind!r}")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0

    def sq_norm_bound(self, T: int) -> float:
        """Upper bound on ``sum_{i > T} theta_i**2``."""
        if self.is_zero:
            return 0.0
        e2 = 2.0 * self.exponent
        return self.amplitude ** 2 * T ** (1.0 - e2) / (e2 - 1.0)

    def header(self) -> str:
        if self.kind == "zero":
            return "# tail: zero"
        return f"# tail: power amplitude={self.amplitude!r} exponent={self.exponent!r}"

    @classmethod
    def parse_header(cls, line: str) -> "Tail":
        body = line.lstrip("#").strip()
        if not body.startswith("tail:"):
            raise ValueError(f"missing tail descriptor header: {line!r}")
        parts = body[len("tail:"):].split()
        if parts[0] == "zero":
            return cls()
        if parts[0] != "power":
            raise ValueError(f"unknown tail kind in header {line!r}")
        kv = dict(p.split("=", 1) for p in parts[1:])
        return cls("power", float(kv["amplitude"]), float(kv["exponent"]))


@dataclass(frozen=True, eq=False)
class TruthSequence:
    coeffs: np.ndarray
    tail: Tail = field(default_factory=Tail)
    label: str = ""

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("coeffs must be a nonempty 1-d array")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def T(self) -> int:
        return self.coeffs.size

    def padded(self, size: int) -> np.ndarray:
        """Coefficients ``theta_1..theta_size``; zero-fills a zero tail."""
        if size <= self.T:
            return self.coeffs[:size]
        if not self.tail.is_zero:
            raise ValueError(
                f"truth {self.label!r} stores {self.T} coefficients with a nonzero tail; "
                f"cannot extend to {size}")
        out = np.zeros(size)
        out[: self.T] = self.coeffs
        return out

    def tail_sq_norm(self) -> float:
        return self.tail.sq_norm_bound(self.T)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.tail.header() + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "theta"])
        for i, v in enumerate(self.coeffs, start=1):
            w.writerow([i, repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, label: str = "") -> "TruthSequence":
        lines = text.splitlines()
        tail = Tail.parse_header(lines[0])
        rows = list(csv.reader(lines[1:]))
        if rows[0] != ["i", "theta"]:
            raise ValueError("expected header 'i,theta'")
        idx = [int(r[0]) for r in rows[1:]]
        if idx != list(range(1, len(idx) + 1)):
            raise ValueError("indices must run 1..T without gaps")
        return cls(np.array([float(r[1]) for r in rows[1:]]), tail, label)


# ---------------------------------------------------------------- constructors

def make_selfsim_truth(T: int) -> TruthSequence:
    """``theta_i = i**-1.5 * sin(i)`` with the first coordinate zeroed."""
    if T < 2:
        raise ValueError("T must be at least 2")
    i = np.arange(1, T + 1, dtype=float)
    c = i ** -1.5 * np.sin(i)
    c[0] = 0.0
    return TruthSequence(c, Tail("power", 1.0, 1.5), "selfsim")


def make_bad_truth(T: int, first: float = 8.0) -> TruthSequence:
    """Spiked sequence whose polynomial blocks start at ``2**64``.

    ``first`` is the value of ``theta_1``: 8 as used in the published
    simulation, or 0 to respect the zero-first-coordinate convention.
    """
    if T < 50:
        raise ValueError("T must be at least 50 to hold the spike at i=50")
    c = np.zeros(T)
    c[0] = first
    c[2] = 2.0
    c[49] = -2.0
    j = 3
    while 2 ** (4 ** j) < T:
        lo, hi = 2 ** (4 ** j), 2 * 2 ** (4 ** j)
        i = np.arange(lo + 1, min(hi, T) + 1, dtype=float)
        c[lo: min(hi, T)] = i ** -1.5
        j += 1
    # blocks past 2**64 carry squared mass below 1e-38
    return TruthSequence(c, Tail(), "bad" if first else "bad0")


def counterexample_gaps(beta: float, rho_seq: Sequence[float], n_seq: Sequence[int],
                        p: float) -> list[tuple[float, float, float]]:
    """``(lo, N_j, hi)`` per j: zeros on ``[lo, N_j)`` and ``[2 N_j, hi]``."""
    e = 1.0 / (1.0 + 2.0 * beta + 2.0 * p)
    return [(n ** e / r, n ** e, r * n ** e) for r, n in zip(rho_seq, n_seq)]


def make_counterexample_truth(beta: float, M: float, rho_seq: Sequence[float],
                              n_seq: Sequence[int], p: float, T: int) -> TruthSequence:
    """Hyperrectangle element with zero gaps around the effective dimensions ``n_j**(1/(1+2beta+2p))``."""
    if len(rho_seq) != len(n_seq) or not n_seq:
        raise ValueError("rho_seq and n_seq must be nonempty and of equal length")
    if any(r < 1 for r in rho_seq) or any(b < a for a, b in zip(rho_seq, rho_seq[1:])):
        raise ValueError("rho_seq must be nondecreasing and >= 1")
    r = 1.0 + 2.0 * beta + 2.0 * p
    for j in range(len(n_seq) - 1):
        need = (2.0 * rho_seq[j + 1] ** 2) ** r * n_seq[j]
        if n_seq[j + 1] < need:
            raise ValueError(
                f"growth condition fails at j={j + 1}: n_{j + 2}={n_seq[j + 1]} < {need:.6g}")
    i = np.arange(1, T + 1, dtype=float)
    c = math.sqrt(M) * i ** (-0.5 - beta)
    for lo, N, hi in counterexample_gaps(beta, rho_seq, n_seq, p):
        c[((i >= lo) & (i < N)) | ((i >= 2.0 * N) & (i <= hi))] = 0.0
    c[0] = 0.0
    return TruthSequence(c, Tail("power", math.sqrt(M), 0.5 + beta), "counterexample")


def prior_draw(alpha: float, T: int, seed: SeedLike) -> TruthSequence:
    """One draw from the prior truncated at ``T`` (first coordinate zeroed)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    i = np.arange(1, T + 1, dtype=float)
    c = rng.standard_normal(T) * i ** (-0.5 - alpha)
    c[0] = 0.0
    return TruthSequence(c, Tail(), f"prior(alpha={alpha:g})")


def zero_truth(T: int) -> TruthSequence:
    return TruthSequence(np.zeros(T), Tail(), "zero")


# ---------------------------------------------------------------- class checks

@dataclass(frozen=True)
class Hyperrectangle:
    beta: float
    M: float


@dataclass(frozen=True)
class Sobolev:
    beta: float
    M: float


@dataclass(frozen=True)
class PolishedTail:
    L0: float
    N0: int = 2
    rho: float = 2.0


@dataclass(frozen=True)
class SelfSimilar:
    beta: float
    M: float
    eps: float
    N0: int = 2
    rho: float = 2.0


@dataclass(frozen=True)
class CZeroZero:
    N0: int
    M: float


@dataclass(frozen=True)
class SuperSmooth:
    c: float
    d: float
    M: float


@dataclass(frozen=True)
class ClassCheck:
    """Outcome of a membership check.

    ``member`` is None when the truncation cannot settle the question.
    ``witness`` is the worst index (or block start N) and ``margin`` the slack
    of the defining inequality there; negative margin means violation.
    ``checked_up_to`` is the largest index or N actually examined.
    """

    member: Optional[bool]
    witness: Optional[int]
    margin: float
    checked_up_to: int
    reason: str = ""

    @property
    def decided(self) -> bool:
        return self.member is not None

    def __bool__(self):
        if self.member is None:
            raise UndecidableError(self.reason or "undecidable at this truncation")
        return self.member


def _undecidable(T: int, reason: str) -> ClassCheck:
    return ClassCheck(None, None, math.nan, T, reason)


def _block_sums(sq: np.ndarray, rho: float, N: np.ndarray) -> np.ndarray:
    """``sum_{i=N}^{floor(rho N)} sq_i`` for 1-based N (requires rho N <= T)."""
    cum = np.concatenate(([0.0], np.cumsum(sq)))
    hi = np.floor(rho * N + 1e-9).astype(int)
    return cum[hi] - cum[N - 1]


def _tail_sums(sq: np.ndarray, tail_bound: float, N: np.ndarray) -> np.ndarray:
    """``sum_{i >= N} sq_i`` plus the tail bound beyond truncation."""
    rev = np.cumsum(sq[::-1])[::-1]
    return rev[N - 1] + tail_bound


def polished_tail_violations(sq: np.ndarray, L0: float, rho: float,
                             tail_bound: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Slack ``L0 * block(N) - tail(N)`` for every checkable ``N = 1..T/rho``.

    ``sq`` may be 2-d (one sequence of squares per row); returns ``(N, slack)``.
    """
    sq = np.atleast_2d(sq)
    T = sq.shape[1]
    Nmax = int(math.floor(T / rho + 1e-9))
    N = np.arange(1, Nmax + 1)
    cum = np.concatenate((np.zeros((sq.shape[0], 1)), np.cumsum(sq, axis=1)), axis=1)
    hi = np.floor(rho * N + 1e-9).astype(int)
    block = cum[:, hi] - cum[:, N - 1]
    tail = cum[:, -1:] - cum[:, N - 1] + tail_bound
    return N, L0 * block - tail


def is_in_class(theta: TruthSequence, params) -> ClassCheck:
    """Check the defining inequality of ``params`` on ``theta``.

    Conditions quantified over all N >= N0 are checked for N up to T/rho;
    tails enter through the envelope in ``theta.tail``.
    """
    c = theta.coeffs
    T = theta.T
    sq = c * c
    tail = theta.tail
    i = np.arange(1, T + 1, dtype=float)

    if isinstance(params, Hyperrectangle):
        w = i ** (1.0 + 2.0 * params.beta) * sq
        k = int(np.argmax(w))
        worst, witness = float(w[k]), k + 1
        if not tail.is_zero:
            expo = 1.0 + 2.0 * params.beta - 2.0 * tail.exponent
            if expo > 1e-12:
                return _undecidable(T, "tail envelope decays too slowly for this hyperrectangle")
            tb = tail.amplitude ** 2 * (T + 1.0) ** expo
            if tb > worst:
                worst, witness = tb, T + 1
        return ClassCheck(worst <= params.M * (1 + 1e-12), witness, params.M - worst, T)

    if isinstance(params, Sobolev):
        total = float(np.sum(i ** (2.0 * params.beta) * sq))
        if not tail.is_zero:
            expo = 2.0 * params.beta - 2.0 * tail.exponent
            if expo >= -1.0:
                return _undecidable(T, "tail envelope not summable for this Sobolev weight")
            total += tail.amplitude ** 2 * T ** (expo + 1.0) / (-expo - 1.0)
        return ClassCheck(total <= params.M, None, params.M - total, T)

    if isinstance(params, PolishedTail):
        N, slack = polished_tail_violations(sq, params.L0, params.rho, theta.tail_sq_norm())
        slack = slack[0]
        keep = N >= params.N0
        if not keep.any():
            return _undecidable(T, f"no N in [{params.N0}, T/rho] to check")
        N, slack = N[keep], slack[keep]
        k = int(np.argmin(slack))
        return ClassCheck(bool(slack[k] >= 0), int(N[k]), float(slack[k]), int(N[-1]))

    if isinstance(params, SelfSimilar):
        rect = is_in_class(theta, Hyperrectangle(params.beta, params.M))
        if not rect.decided:
            return rect
        if not rect.member:
            return ClassCheck(False, rect.witness, rect.margin, T, "outside the hyperrectangle")
        Nmax = int(math.floor(T / params.rho + 1e-9))
        if Nmax < params.N0:
            return _undecidable(T, f"no N in [{params.N0}, T/rho] to check")
        N = np.arange(params.N0, Nmax + 1)
        slack = _block_sums(sq, params.rho, N) - params.eps * params.M * N ** (-2.0 * params.beta)
        k = int(np.argmin(slack))
        return ClassCheck(bool(slack[k] >= 0), int(N[k]), float(slack[k]), Nmax)

    if isinstance(params, CZeroZero):
        if not tail.is_zero:
            return _undecidable(T, "power-law tail envelope cannot certify exact zeros")
        beyond = np.abs(c[params.N0:])
        if beyond.size and beyond.max() > 0:
            k = int(np.argmax(beyond))
            return ClassCheck(False, params.N0 + k + 1, -float(beyond[k]), T)
        head = np.abs(c[: params.N0])
        k = int(np.argmax(head))
        margin = math.sqrt(params.M) - float(head[k])
        return ClassCheck(margin >= 0, k + 1, margin, T)

    if isinstance(params, SuperSmooth):
        if not tail.is_zero:
            return _undecidable(T, "power-law tail envelope cannot bound an exponential weight")
        with np.errstate(over="ignore"):
            w = np.exp(params.c * i ** params.d) * sq
        total = float(np.sum(w[sq > 0])) if (sq > 0).any() else 0.0
        return ClassCheck(total <= params.M, None, params.M - total, T)

    raise TypeError(f"unknown class parameters {params!r}")


def smallest_polished_N0(sq: np.ndarray, L0: float, rho: float = 2.0,
                         tail_bound: float = 0.0) -> np.ndarray:
    """Smallest N0 for which each row passes the polished-tail check up to T/rho.

    Rows that violate at the last checkable N get ``T/rho + 1``.
    """
    N, slack = polished_tail_violations(sq, L0, rho, tail_bound)
    bad = slack < 0
    any_bad = bad.any(axis=1)
    last_bad = N.size - 1 - np.argmax(bad[:, ::-1], axis=1)
    return np.where(any_bad, N[last_bad] + 1, 1)
