import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ebcred.sequence_model import (KappaSpec, ModelConfig, TruncationWarning, default_trunc,
                                   make_kappa, make_rng, synthesize)
from ebcred.truths import TruthSequence, Tail, make_selfsim_truth, zero_truth

from conftest import model


class TestKappa:
    def test_examples(self):
        assert make_kappa(KappaSpec.power(0.0), 7) == 1.0
        assert make_kappa(KappaSpec.volterra(), 1) == pytest.approx(0.636620, abs=1e-6)
        assert make_kappa(KappaSpec.power(1.0), 10) == pytest.approx(0.1, rel=1e-15)

    def test_index_must_be_positive(self):
        with pytest.raises(ValueError):
            make_kappa(KappaSpec.volterra(), 0)

    @pytest.mark.parametrize("spec", [KappaSpec.volterra(), KappaSpec.power(1.0),
                                      KappaSpec.power(0.5, C=2.0), KappaSpec.power(0.0)])
    def test_envelope_direct_loop(self, spec):
        for i in range(1, 5001):
            k2 = make_kappa(spec, i) ** 2
            lo = spec.C ** -2 * i ** (-2 * spec.p)
            hi = spec.C ** 2 * i ** (-2 * spec.p)
            assert lo * (1 - 1e-12) <= k2 <= hi * (1 + 1e-12)

    def test_volterra_certified_pair(self):
        spec = KappaSpec.volterra()
        assert spec.p == 1.0 and spec.C == pytest.approx(math.pi)

    @pytest.mark.parametrize("spec", [KappaSpec.volterra(), KappaSpec.power(0.3)])
    def test_strictly_decreasing(self, spec):
        v = spec.values(10_000)
        assert np.all(v > 0) and np.all(np.diff(v) < 0)

    def test_vector_matches_scalar(self):
        spec = KappaSpec.volterra()
        v = spec.values(50)
        assert np.allclose(v, [make_kappa(spec, i) for i in range(1, 51)], rtol=1e-14)

    def test_dict_roundtrip(self):
        for spec in (KappaSpec.volterra(), KappaSpec.power(1.5, C=3.0)):
            assert KappaSpec.from_dict(spec.to_dict()) == spec


class TestModelConfig:
    def test_default_trunc(self):
        assert default_trunc(1e4, 1.0) == 1000
        assert default_trunc(1e10, 1.0) == 21545
        assert ModelConfig(n=1e6, kappa=KappaSpec.volterra()).trunc == default_trunc(1e6, 1.0)

    @pytest.mark.parametrize("kw", [dict(n=0.5), dict(n=10, gamma=0.0), dict(n=10, gamma=1.0),
                                    dict(n=10, A=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            ModelConfig(**kw)

    def test_short_truncation_warns(self):
        with pytest.warns(TruncationWarning):
            ModelConfig(n=1e6, kappa=KappaSpec.power(0.0), trunc=1000)

    def test_adequate_truncation_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ModelConfig(n=1e6, kappa=KappaSpec.volterra())


class TestSynthesize:
    def test_length_matches_config(self):
        cfg = model(1e4)
        obs = synthesize(make_selfsim_truth(cfg.trunc), cfg, 1)
        assert len(obs) == cfg.trunc and obs.n == cfg.n

    def test_pure_noise_moments(self):
        cfg = model(100.0, trunc=200_000)
        x = synthesize(zero_truth(cfg.trunc), cfg, 5).x
        assert abs(x.mean()) < 5 / math.sqrt(cfg.n * cfg.trunc)
        assert x.var() * cfg.n == pytest.approx(1.0, rel=0.02)

    def test_signal_dominates_first_coordinates(self):
        cfg = model(1e6)
        truth = make_selfsim_truth(cfg.trunc)
        kappa = cfg.kappa.values(3)
        for seed in range(20):
            x = synthesize(truth, cfg, seed).x
            assert np.all(np.abs(x[:3] - kappa * truth.coeffs[:3]) <= 5 / math.sqrt(cfg.n))

    def test_replay_bit_identical(self):
        cfg = model(1e6)
        truth = make_selfsim_truth(cfg.trunc)
        a, b = synthesize(truth, cfg, 42).x, synthesize(truth, cfg, 42).x
        assert a.tobytes() == b.tobytes()
        assert synthesize(truth, cfg, 43).x.tobytes() != a.tobytes()

    def test_noise_calibration(self):
        cfg = model(1e4, trunc=1000)
        truth = make_selfsim_truth(cfg.trunc)
        mean = cfg.kappa.values(cfg.trunc) * truth.coeffs
        reps = np.array([synthesize(truth, cfg, make_rng(9, r)).x for r in range(10_000)])
        idx = [0, 1, 2, 9, 49, 99, 249, 499, 749, 999]
        var = (reps[:, idx] - mean[idx]).var(axis=0)
        assert np.all(np.abs(var * cfg.n - 1.0) < 0.05)

    def test_observation_is_read_only(self):
        cfg = model(1e4)
        x = synthesize(zero_truth(cfg.trunc), cfg, 0).x
        with pytest.raises(ValueError):
            x[0] = 1.0

    def test_short_truth_with_nonzero_tail_rejected(self):
        cfg = model(1e4)
        with pytest.raises(ValueError):
            synthesize(make_selfsim_truth(cfg.trunc // 2), cfg, 0)

    def test_short_truth_with_zero_tail_is_padded(self):
        cfg = model(1e4)
        truth = TruthSequence(np.array([0.0, 1.0]), Tail())
        x = synthesize(truth, cfg, 0).x
        assert len(x) == cfg.trunc


class TestStreams:
    def test_substreams_differ(self):
        a = make_rng(7, 0).standard_normal(4)
        b = make_rng(7, 1).standard_normal(4)
        assert not np.array_equal(a, b)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32), st.integers(0, 10_000))
    def test_substream_reproducible(self, seed, rep):
        assert np.array_equal(make_rng(seed, rep).random(3), make_rng(seed, rep).random(3))
