"""Statistical primitives, path-parallel evaluation and reports."""
from __future__ import annotations

import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from roughlab import stats_harness as sh
from roughlab.errors import ConfigInvalid, DegenerateInput, TooFewSamples
from roughlab.stats_harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    ExperimentReport,
    dumps_json,
    format_real,
    ks_one_sample,
    ks_two_sample,
    map_paths,
    rate_regression,
    resolve_name,
    run,
    summarize,
)


class TestKS:
    def test_same_law_accepted(self, rng):
        res = ks_two_sample(rng.standard_normal(2000), rng.standard_normal(2000))
        assert res.p > 0.001

    def test_shift_rejected(self, rng):
        res = ks_two_sample(rng.standard_normal(2000), rng.standard_normal(2000) + 0.5)
        assert res.p < 1e-6

    def test_one_sample(self, rng):
        assert ks_one_sample(rng.standard_normal(3000), stats.norm.cdf).p > 0.001
        assert ks_one_sample(2 * rng.standard_normal(3000), stats.norm.cdf).p < 1e-6

    def test_statistic_by_hand(self):
        # sup |F_a - F_b| for disjoint samples is 1
        a = np.arange(60.0)
        assert ks_two_sample(a, a + 100).stat == 1.0

    def test_too_few(self):
        with pytest.raises(TooFewSamples):
            ks_two_sample(np.zeros(10), np.zeros(100))
        with pytest.raises(TooFewSamples):
            ks_one_sample(np.zeros(49), stats.norm.cdf)


class TestRate:
    def test_exact_power_law(self):
        ns = 2.0 ** np.arange(8, 14)
        fit = rate_regression(ns, 3.0 * ns**-0.5)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.ci[0] == pytest.approx(-0.5, abs=1e-9)
        assert fit.intercept == pytest.approx(math.log(3.0))

    def test_ci_matches_t_quantile(self, rng):
        ns = 2.0 ** np.arange(6, 12)
        errs = ns**-0.4 * np.exp(0.05 * rng.standard_normal(ns.size))
        fit = rate_regression(ns, errs, level=0.9)
        ref = stats.linregress(np.log(ns), np.log(errs))
        half = stats.t.ppf(0.95, ns.size - 2) * ref.stderr
        assert fit.ci == pytest.approx((ref.slope - half, ref.slope + half))

    @pytest.mark.parametrize("ns,errs", [
        ([1, 2, 3], [1, 1, 1]),
        ([1, 2, 3, 4], [1, 0, 1, 1]),
        ([4, 4, 4, 4], [1, 2, 3, 4]),
        ([1, 2, 3, 4], [1, np.nan, 1, 1]),
    ])
    def test_degenerate(self, ns, errs):
        with pytest.raises(DegenerateInput):
            rate_regression(ns, errs)

    @given(st.floats(-2, 2), st.floats(0.1, 10))
    @settings(max_examples=30, deadline=None)
    def test_recovers_any_slope(self, slope, c):
        ns = np.array([16.0, 64.0, 256.0, 1024.0])
        fit = rate_regression(ns, c * ns**slope)
        assert fit.slope == pytest.approx(slope, abs=1e-9)
        assert fit.ci[0] <= fit.slope <= fit.ci[1]


class TestSummaries:
    def test_summarize(self):
        s = summarize([1.0, 2.0, 3.0, 4.0])
        assert s["M"] == 4 and s["stat_mean"] == 2.5
        assert s["stat_var"] == pytest.approx(5 / 3)
        assert s["se"] == pytest.approx(math.sqrt(5 / 12))

    def test_format_real(self):
        assert format_real(0.1) == "0.10000000000000001"
        assert format_real(None) == ""
        assert format_real(True) == "true"
        assert format_real(3) == "3"

    def test_json_round_trip(self):
        obj = {"a": [1, 0.1, None, True], "b": {"x": math.pi, "y": math.inf}, "c": "s"}
        back = json.loads(dumps_json(obj))
        assert back["a"] == [1, 0.1, None, True]
        assert back["b"]["x"] == math.pi
        assert back["b"]["y"] is None
        assert "3.1415926535897931" in dumps_json(obj)


class TestMapPaths:
    @staticmethod
    def terminal(batch):
        return {"end": batch.values[:, 0, -1], "idx": batch.start + np.arange(batch.M)}

    def test_thread_count_irrelevant(self, monkeypatch):
        monkeypatch.setattr(sh, "CHUNK_VALUES", 33 * 7)
        one = map_paths(self.terminal, 32, 0.3, 50, seed=4, threads=1)
        many = map_paths(self.terminal, 32, 0.3, 50, seed=4, threads=8)
        np.testing.assert_array_equal(one["end"], many["end"])
        np.testing.assert_array_equal(one["idx"], np.arange(50))

    def test_chunking_irrelevant(self, monkeypatch):
        whole = map_paths(self.terminal, 32, 0.3, 30, seed=4, threads=1)
        monkeypatch.setattr(sh, "CHUNK_VALUES", 33 * 4)
        cut = map_paths(self.terminal, 32, 0.3, 30, seed=4, threads=3)
        np.testing.assert_array_equal(whole["end"], cut["end"])


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        {"ns": [64, 32]},
        {"ns": [32, 32]},
        {"ns": [0, 4]},
        {"M": 99},
        {"nu": "1.3"},
        {"nu": "x"},
        {"threads": 0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigInvalid):
            ExperimentConfig("smoke", **kwargs).validate()

    def test_valid(self):
        ExperimentConfig("A4", nu="1/4", ns=[16, 32], M=100, threads=2).validate()

    @pytest.mark.parametrize("name,crit", [
        ("A4", "A4"), ("a4", "A4"), ("bm-weighted-clt", "A4"), ("breuer-major", "A3"),
        ("area", "A10"), ("smoke", "SMOKE"), ("selftest", "SMOKE"),
        ("area-refinement", "AREA-R"), ("trapezoidal-critical", "TRAP-CRIT"),
    ])
    def test_names(self, name, crit):
        assert resolve_name(name) == crit

    def test_all_criteria_registered(self):
        resolve_name("A1")
        assert {f"A{i}" for i in range(1, 11)} <= set(sh.EXPERIMENTS)

    def test_unknown(self):
        with pytest.raises(ConfigInvalid):
            resolve_name("A11")


class TestReport:
    def make(self):
        r = ExperimentReport("A0", "A0", {"M": 100, "seed": 1})
        r.add_row(64, summarize(np.arange(100.0)), predicted=49.5, ks=sh.KSResult(0.1, 0.5), verdict="PASS")
        r.judge("mean", True, 49.5, "< 1")
        r.judge("info", False, 2.0, "-", informational=True)
        return r

    def test_passed_ignores_informational(self):
        r = self.make()
        assert r.passed
        r.judge("other", False, 3.0, "< 1")
        assert not r.passed

    def test_csv(self):
        rows = list(csv.reader(io.StringIO(self.make().to_csv())))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert rows[1][0] == "A0" and rows[1][1] == "64" and rows[1][-1] == "PASS"

    def test_json_and_files(self, tmp_path):
        r = self.make()
        d = json.loads(r.to_json())
        assert d["passed"] is True and d["rows"][0]["predicted"] == 49.5
        r.write(tmp_path / "out")
        assert (tmp_path / "out" / "A0.json").exists()
        assert (tmp_path / "out" / "A0.csv").read_text() == r.to_csv()

    def test_summary_lines(self):
        lines = self.make().summary_lines()
        assert lines[0].startswith("A0 [PASS] mean")
        assert "[INFO]" in lines[1]


class TestRun:
    def test_smoke_passes_and_is_deterministic(self):
        a = run(ExperimentConfig("smoke", threads=1))
        b = run(ExperimentConfig("smoke", threads=4))
        assert a.passed
        assert a.to_json() == b.to_json()
        assert a.criterion == "SMOKE"

    def test_overrides_reach_config(self):
        r = run(ExperimentConfig("smoke", seed=7, params={"trials": 20}))
        assert r.config["seed"] == 7
        assert r.config["params"]["trials"] == 20
