"""Seeded Monte Carlo experiments: coverage, band figures, diagnostics, prior check, minimax.

Every replication draws from its own substream ``make_rng(seed, rep)`` (the
prior check adds the alpha index), so results do not depend on how
replications are scheduled across worker processes.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .credible import credible_ball, distance_bound, sample_band
from .diagnostics import DiagnosticsReport, diagnose, minimax_linear_risk
from .eb_inference import estimate_alpha
from .sequence_model import KappaSpec, ModelConfig, TruncationWarning, default_trunc, make_rng, synthesize
from .truths import (TruthSequence, make_bad_truth, make_counterexample_truth, make_selfsim_truth,
                     prior_draw, smallest_polished_N0, zero_truth)

log = logging.getLogger(__name__)

MODES = ("coverage", "figures", "diagnose", "prior-check", "minimax")
TRUNC_CAP = 100_000


class ConfigError(ValueError):
    pass


class NumericalFailure(ArithmeticError):
    pass


# ------------------------------------------------------------------ spec

@dataclass
class ExperimentSpec:
    mode: str = "coverage"
    truth: str = "selfsim"
    truth_params: dict = field(default_factory=dict)
    kappa: dict = field(default_factory=lambda: {"kind": "volterra"})
    A: float = 5.0
    gamma: float = 0.05
    trunc: Optional[int] = None
    trunc_cap: int = TRUNC_CAP
    n_list: list = field(default_factory=lambda: [1e4, 1e6, 1e8])
    L: float = 1.0
    reps: int = 200
    seed: int = 0
    out: Optional[str] = None
    workers: int = 1
    # figures
    draws: int = 2000
    keep: float = 0.95
    grid_points: int = 201
    # prior-check
    prior_alphas: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    prior_T: int = 2 ** 14
    prior_N0_max: int = 64
    # minimax / diagnose benchmark class
    beta: float = 1.0
    M: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.truth not in TRUTHS:
            raise ConfigError(f"unknown truth {self.truth!r}; choose from {sorted(TRUTHS)}")
        if not isinstance(self.reps, int) or self.reps < 1:
            raise ConfigError("reps must be a positive integer")
        if not self.n_list:
            raise ConfigError("n_list must be nonempty")
        try:
            self.n_list = [float(n) for n in self.n_list]
            KappaSpec.from_dict(self.kappa)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from e
        if any(n < 1 for n in self.n_list):
            raise ConfigError("every n must be >= 1")
        if not self.L > 0:
            raise ConfigError("L must be positive")
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)")
        if not self.A > 0:
            raise ConfigError("A must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(cls, path: str | os.PathLike, **overrides) -> "ExperimentSpec":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(d, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)

    def model(self, n: float) -> ModelConfig:
        kappa = KappaSpec.from_dict(self.kappa)
        trunc = self.trunc or min(default_trunc(n, kappa.p), self.trunc_cap)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            return ModelConfig(n=n, kappa=kappa, A=self.A, gamma=self.gamma, trunc=trunc)

    def make_truth(self, T: int) -> TruthSequence:
        return TRUTHS[self.truth](T, **self.truth_params)


def _csv_truth(T: int, path: str) -> TruthSequence:
    with open(path) as fh:
        return TruthSequence.from_csv(fh.read(), label=Path(path).stem)


def _counterexample(T: int, beta=1.0, M=1.0, rho_seq=(4.0, 8.0), n_seq=(100, None), p=1.0):
    n_seq = list(n_seq)
    for j in range(1, len(n_seq)):
        if n_seq[j] is None:
            n_seq[j] = int(math.ceil((2 * rho_seq[j] ** 2) ** (1 + 2 * beta + 2 * p) * n_seq[j - 1]))
    return make_counterexample_truth(beta, M, list(rho_seq), n_seq, p, T)


TRUTHS = {
    "selfsim": lambda T: make_selfsim_truth(T),
    "bad": lambda T, first=8.0: make_bad_truth(T, first=first),
    "bad0": lambda T: make_bad_truth(T, first=0.0),
    "zero": lambda T: zero_truth(T),
    "counterexample": _counterexample,
    "csv": _csv_truth,
}


# ------------------------------------------------------------------ results

@dataclass
class CoverageResult:
    n: float
    coverage: float
    covered: int
    reps: int
    mean_radius: float
    infinite_radius: int
    mean_alpha_hat: float
    ci_halfwidth: float

    @classmethod
    def from_reps(cls, n: float, rows: list[dict]) -> "CoverageResult":
        reps = len(rows)
        covered = sum(r["covered"] for r in rows)
        cov = covered / reps
        finite = [r["radius"] for r in rows if math.isfinite(r["radius"])]
        return cls(n=n, coverage=cov, covered=covered, reps=reps,
                   mean_radius=float(np.mean(finite)) if finite else math.inf,
                   infinite_radius=reps - len(finite),
                   mean_alpha_hat=float(np.mean([r["alpha_hat"] for r in rows])),
                   ci_halfwidth=1.96 * math.sqrt(cov * (1 - cov) / reps))


def _map(func, items, workers: int) -> list:
    if workers <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(func, items, chunksize=max(1, len(items) // (4 * workers))))


def _coverage_rep(args) -> dict:
    spec_d, n, rep = args
    spec = ExperimentSpec.from_dict(spec_d)
    cfg = spec.model(n)
    truth = spec.make_truth(cfg.trunc)
    try:
        with np.errstate(invalid="raise", divide="ignore", over="ignore", under="ignore"):
            obs = synthesize(truth, cfg, make_rng(spec.seed, rep))
            ball = credible_ball(obs, cfg, spec.L)
            dist = distance_bound(ball.center, truth)
    except (ArithmeticError, ValueError) as e:
        raise NumericalFailure(f"replication {rep} at n={n:g}: {e}") from e
    if not (math.isfinite(ball.alpha_used) and (math.isfinite(ball.radius) or ball.alpha_used == 0)):
        raise NumericalFailure(f"replication {rep} at n={n:g}: non-finite result")
    return {"rep": rep, "alpha_hat": ball.alpha_used, "radius": ball.radius, "distance": dist,
            "covered": bool(dist <= ball.effective_radius or math.isinf(ball.radius))}


def _n_tag(n: float) -> str:
    return f"{n:g}"


def _prepare_out(spec: ExperimentSpec) -> Optional[Path]:
    if spec.out is None:
        return None
    out = Path(spec.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "spec.json", json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    return out


def _write_text(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from e


def _write_rows(path: Path, header: list[str], rows: list[list]):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from e


def run_coverage(spec: ExperimentSpec) -> list[CoverageResult]:
    out = _prepare_out(spec)
    spec_d = spec.to_dict()
    results = []
    for n in spec.n_list:
        rows = _map(_coverage_rep, [(spec_d, n, r) for r in range(spec.reps)], spec.workers)
        res = CoverageResult.from_reps(n, rows)
        log.info("n=%g coverage=%.3f mean_alpha_hat=%.3f", n, res.coverage, res.mean_alpha_hat)
        results.append(res)
        if out:
            _write_rows(out / f"coverage_n={_n_tag(n)}.csv",
                        ["rep", "alpha_hat", "radius", "distance", "covered"],
                        [[r["rep"], repr(r["alpha_hat"]), repr(r["radius"]), repr(r["distance"]),
                          int(r["covered"])] for r in rows])
    if out:
        _write_text(out / "summary.json", json.dumps(
            {"mode": "coverage", "results": [asdict(r) for r in results]}, indent=2) + "\n")
    return results


def run_figures(spec: ExperimentSpec) -> dict:
    out = _prepare_out(spec)
    bands = {}
    grid = np.linspace(0.0, 1.0, spec.grid_points)
    for k, n in enumerate(spec.n_list):
        cfg = spec.model(n)
        if cfg.kappa.kind != "volterra":
            raise ConfigError("figures mode requires the volterra kappa spec")
        truth = spec.make_truth(cfg.trunc)
        obs = synthesize(truth, cfg, make_rng(spec.seed, k, 0))
        band = sample_band(obs, cfg, spec.draws, spec.keep, grid, truth, make_rng(spec.seed, k, 1))
        bands[n] = band
        if out:
            _write_text(out / f"band_n={_n_tag(n)}.csv", band.to_csv())
    if out:
        summary = {"mode": "figures", "bands": [
            {"n": n, "alpha_hat": b.alpha_hat, "kept": b.kept,
             "truth_inside_fraction": float(np.mean(b.truth_inside()))} for n, b in bands.items()]}
        _write_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    return bands


def _alpha_hat_rep(args) -> float:
    spec_d, n, rep = args
    spec = ExperimentSpec.from_dict(spec_d)
    cfg = spec.model(n)
    truth = spec.make_truth(cfg.trunc)
    return estimate_alpha(synthesize(truth, cfg, make_rng(spec.seed, rep)), cfg).alpha_hat


def run_diagnose(spec: ExperimentSpec) -> list[DiagnosticsReport]:
    out = _prepare_out(spec)
    reports = []
    spec_d = spec.to_dict()
    for n in spec.n_list:
        cfg = spec.model(n)
        truth = spec.make_truth(cfg.trunc)
        rep = diagnose(truth, cfg, spec.beta, spec.M)
        if spec.reps > 1:
            hats = _map(_alpha_hat_rep, [(spec_d, n, r) for r in range(spec.reps)], spec.workers)
            rep.alpha_hats = [float(a) for a in hats]
            rep.capture_frequency = float(np.mean(
                [rep.alpha_lower <= a <= rep.alpha_upper for a in hats]))
        reports.append(rep)
        if out:
            _write_text(out / f"diagnostics_n={_n_tag(n)}.json", rep.to_json() + "\n")
    if out:
        _write_text(out / "summary.json", json.dumps({"mode": "diagnose", "reports": [
            {"n": r.n, "alpha_lower": r.alpha_lower, "alpha_upper": r.alpha_upper,
             "oracle_risk": r.oracle_risk, "oracle_alpha": r.oracle_alpha,
             "minimax_linear": r.minimax_linear, "capture_frequency": r.capture_frequency}
            for r in reports]}, indent=2) + "\n")
    return reports


def _prior_batch(args) -> np.ndarray:
    seed, k, alpha, T, reps, L0 = args
    sq = np.empty((len(reps), T))
    for j, rep in enumerate(reps):
        c = prior_draw(alpha, T, make_rng(seed, k, rep)).coeffs
        sq[j] = c * c
    return smallest_polished_N0(sq, L0, 2.0)


def run_prior_check(spec: ExperimentSpec) -> dict:
    out = _prepare_out(spec)
    summary = {"mode": "prior-check", "T": spec.prior_T, "reps": spec.reps,
               "N0_max": spec.prior_N0_max, "rho": 2.0, "results": []}
    N0_grid = list(range(2, spec.prior_N0_max + 1, 2))
    for k, alpha in enumerate(spec.prior_alphas):
        if not alpha > 0:
            raise ConfigError("prior alphas must be positive")
        L0 = 2.0 / alpha + 1.0
        chunks = [list(range(s, min(s + 250, spec.reps))) for s in range(0, spec.reps, 250)]
        N0 = np.concatenate(_map(_prior_batch, [(spec.seed, k, alpha, spec.prior_T, c, L0)
                                                for c in chunks], spec.workers))
        summary["results"].append({
            "alpha": alpha, "L0": L0,
            "pass_fraction": float(np.mean(N0 <= spec.prior_N0_max)),
            "pass_fraction_by_N0": {str(m): float(np.mean(N0 <= m)) for m in N0_grid},
        })
    if out:
        _write_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    return summary


def run_minimax(spec: ExperimentSpec) -> dict:
    out = _prepare_out(spec)
    rows = []
    for n in spec.n_list:
        cfg = spec.model(n)
        r = 1.0 + 2.0 * spec.beta + 2.0 * cfg.p
        risk, tail = minimax_linear_risk(spec.beta, spec.M, cfg, with_tail=True)
        rate = spec.M ** ((1.0 + 2.0 * cfg.p) / r) * n ** (-2.0 * spec.beta / r)
        rows.append({"n": n, "risk": risk, "tail_bound": tail, "rate": rate, "risk_over_rate": risk / rate})
    summary = {"mode": "minimax", "beta": spec.beta, "M": spec.M, "results": rows}
    if out:
        _write_rows(out / "minimax.csv", ["n", "risk", "tail_bound", "rate", "risk_over_rate"],
                    [[repr(v) for v in row.values()] for row in rows])
        _write_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    return summary


RUNNERS = {
    "coverage": run_coverage,
    "figures": run_figures,
    "diagnose": run_diagnose,
    "prior-check": run_prior_check,
    "minimax": run_minimax,
}


def run(spec: ExperimentSpec):
    return RUNNERS[spec.mode](spec)
