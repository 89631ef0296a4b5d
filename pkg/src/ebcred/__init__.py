"""Empirical Bayes credible balls in the inverse Gaussian sequence model."""
from .credible import CredibleBall, contains, credible_ball, radius, sample_band
from .diagnostics import alpha_bounds, bias_variance, diagnose, h_n, minimax_linear_risk, oracle_risk
from .eb_inference import empirical_bayes_posterior, estimate_alpha, log_marginal_likelihood, posterior, score
from .sequence_model import KappaSpec, ModelConfig, Observation, make_kappa, synthesize
from .truths import (TruthSequence, is_in_class, make_bad_truth, make_counterexample_truth,
                     make_selfsim_truth, prior_draw)

__version__ = "0.1.0"

__all__ = [
    "CredibleBall", "contains", "credible_ball", "radius", "sample_band",
    "alpha_bounds", "bias_variance", "diagnose", "h_n", "minimax_linear_risk", "oracle_risk",
    "empirical_bayes_posterior", "estimate_alpha", "log_marginal_likelihood", "posterior", "score",
    "KappaSpec", "ModelConfig", "Observation", "make_kappa", "synthesize",
    "TruthSequence", "is_in_class", "make_bad_truth", "make_counterexample_truth",
    "make_selfsim_truth", "prior_draw",
]
