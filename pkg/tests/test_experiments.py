import json
import math

import numpy as np
import pytest

from ebcred import cli, experiments
from ebcred.diagnostics import DiagnosticsReport
from ebcred.experiments import (ConfigError, CoverageResult, ExperimentSpec, run, run_coverage,
                                run_diagnose, run_figures, run_minimax, run_prior_check)


def spec(**kw):
    base = dict(reps=4, n_list=[1e4], seed=3)
    base.update(kw)
    return ExperimentSpec(**base)


def read_tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


class TestSpec:
    @pytest.mark.parametrize("kw", [dict(mode="plot"), dict(reps=0), dict(n_list=[]),
                                    dict(truth="nope"), dict(L=0.0), dict(gamma=1.5),
                                    dict(n_list=[0.5]), dict(kappa={"kind": "weird"}),
                                    dict(workers=0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            spec(**kw)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentSpec.from_dict({"mode": "coverage", "colour": "red"})

    def test_dict_roundtrip(self):
        s = spec(truth="bad", truth_params={"first": 0.0}, L=1.5)
        assert ExperimentSpec.from_dict(json.loads(json.dumps(s.to_dict()))) == s

    def test_load_with_overrides(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"mode": "minimax", "n_list": [1e6], "seed": 9}))
        s = ExperimentSpec.load(path, seed=1, reps=None)
        assert s.mode == "minimax" and s.seed == 1 and s.n_list == [1e6]

    def test_load_bad_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentSpec.load(path)

    def test_truncation_cap(self):
        s = spec(kappa={"kind": "power", "p": 0.0, "C": 1.0})
        assert s.model(1e6).trunc == 100_000
        assert spec().model(1e10).trunc == 21545


class TestCoverage:
    def test_deterministic(self):
        a = run_coverage(spec(reps=1))
        b = run_coverage(spec(reps=1))
        assert a == b

    def test_parallel_matches_serial(self, tmp_path):
        # byte-identical reruns, then serial vs parallel
        s = spec(reps=8, out=str(tmp_path / "s"))
        serial = run_coverage(s)
        first = read_tree(tmp_path / "s")
        run_coverage(s)
        assert read_tree(tmp_path / "s") == first
        parallel = run_coverage(spec(reps=8, workers=2, out=str(tmp_path / "p")))
        assert serial == parallel
        name = "coverage_n=10000.csv"
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()

    def test_ci_consistent_with_counts(self):
        for res in run_coverage(spec(reps=10, n_list=[1e3, 1e4], truth="bad")):
            assert res.covered == round(res.coverage * res.reps)
            assert res.ci_halfwidth == pytest.approx(
                1.96 * math.sqrt(res.coverage * (1 - res.coverage) / res.reps))

    def test_output_layout(self, tmp_path):
        out = tmp_path / "run"
        run_coverage(spec(reps=2, n_list=[1e3, 1e4], out=str(out)))
        assert sorted(p.name for p in out.iterdir()) == [
            "coverage_n=1000.csv", "coverage_n=10000.csv", "spec.json", "summary.json"]
        summary = json.loads((out / "summary.json").read_text())
        assert [r["n"] for r in summary["results"]] == [1e3, 1e4]
        assert ExperimentSpec.from_dict(json.loads((out / "spec.json").read_text())).reps == 2
        header = (out / "coverage_n=1000.csv").read_text().splitlines()[0]
        assert header == "rep,alpha_hat,radius,distance,covered"

    def test_infinite_radius_counts_as_covered(self):
        rows = [{"covered": True, "radius": math.inf, "alpha_hat": 0.0},
                {"covered": False, "radius": 0.5, "alpha_hat": 1.0}]
        res = CoverageResult.from_reps(10.0, rows)
        assert res.coverage == 0.5 and res.mean_radius == 0.5 and res.infinite_radius == 1


class TestFigures:
    def test_self_similar_truth_inside_band(self):
        bands = run_figures(spec(mode="figures", n_list=[1e8]))
        assert np.mean(bands[1e8].truth_inside()) >= 0.95

    def test_bad_truth_escapes(self):
        bands = run_figures(spec(mode="figures", truth="bad", n_list=[6e4]))
        assert np.mean(~bands[6e4].truth_inside()) > 0

    def test_csv_schema_and_determinism(self, tmp_path):
        s = spec(mode="figures", n_list=[1e4], out=str(tmp_path))
        run_figures(s)
        a = read_tree(tmp_path)
        run_figures(s)
        assert read_tree(tmp_path) == a
        assert a["band_n=10000.csv"].decode().splitlines()[0] == "t,truth,mean,lower,upper"

    def test_requires_volterra(self):
        with pytest.raises(ConfigError):
            run_figures(spec(mode="figures", kappa={"kind": "power", "p": 1.0}))


class TestDiagnose:
    def test_zero_truth(self):
        (rep,) = run_diagnose(spec(mode="diagnose", truth="zero", reps=1))
        assert rep.alpha_lower == rep.alpha_upper == 5.0
        assert rep.capture_frequency is None

    def test_capture_and_roundtrip(self, tmp_path):
        out = tmp_path / "d"
        (rep,) = run_diagnose(spec(mode="diagnose", reps=5, out=str(out),
                                   kappa={"kind": "power", "p": 0.0, "C": 1.0}))
        assert len(rep.alpha_hats) == 5 and 0 <= rep.capture_frequency <= 1
        back = DiagnosticsReport.from_json((out / "diagnostics_n=10000.json").read_text())
        assert back == rep


class TestPriorCheck:
    def test_fractions(self):
        res = run_prior_check(spec(mode="prior-check", reps=2000, prior_alphas=[0.5, 2.0]))
        for r in res["results"]:
            assert r["pass_fraction"] >= 0.9
            by_n0 = list(r["pass_fraction_by_N0"].values())
            assert by_n0 == sorted(by_n0) and by_n0[-1] == r["pass_fraction"]

    def test_deterministic(self, tmp_path):
        s = spec(mode="prior-check", reps=300, prior_T=1024, out=str(tmp_path))
        run_prior_check(s)
        first = read_tree(tmp_path)
        run_prior_check(s)
        assert read_tree(tmp_path) == first


class TestMinimaxMode:
    def test_rows(self, tmp_path):
        res = run_minimax(spec(mode="minimax", n_list=[1e6, 2e6], out=str(tmp_path)))
        r1, r2 = res["results"]
        assert r2["risk"] / r1["risk"] == pytest.approx(2 ** -0.4, rel=0.03)
        assert (tmp_path / "minimax.csv").read_text().startswith("n,risk,tail_bound,rate,risk_over_rate")

    def test_dispatch(self):
        assert run(spec(mode="minimax", n_list=[1e6])) == run_minimax(spec(mode="minimax", n_list=[1e6]))


class TestCli:
    def test_success_prints_json(self, capsys):
        assert cli.main(["minimax", "--n", "1e6,2e6"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert [r["n"] for r in out["results"]] == [1e6, 2e6]

    def test_writes_directory(self, tmp_path):
        out = tmp_path / "cov"
        assert cli.main(["coverage", "--reps", "2", "--n", "1e3", "--out", str(out), "--seed", "4"]) == 0
        assert (out / "summary.json").exists()
        assert json.loads((out / "spec.json").read_text())["seed"] == 4

    def test_config_file_and_override(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"n_list": [1e6], "beta": 2.0}))
        assert cli.main(["minimax", "--config", str(cfg), "--n", "4e6"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["beta"] == 2.0 and out["results"][0]["n"] == 4e6

    @pytest.mark.parametrize("argv", [["coverage", "--reps", "0"], ["coverage", "--truth", "nope"],
                                      ["coverage", "--config", "/nonexistent/c.json"]])
    def test_config_errors(self, argv, capsys):
        assert cli.main(argv) == 2
        assert "config error" in capsys.readouterr().err

    def test_numerical_failure(self, monkeypatch, capsys):
        def boom(*a, **k):
            raise FloatingPointError("invalid value")
        monkeypatch.setattr(experiments, "credible_ball", boom)
        assert cli.main(["coverage", "--reps", "3", "--n", "1e3"]) == 3
        assert "replication 0" in capsys.readouterr().err

    def test_io_failure(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert cli.main(["minimax", "--out", str(blocker / "sub")]) == 1
        assert str(blocker) in capsys.readouterr().err
