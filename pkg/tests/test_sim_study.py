"""Simulation harness: determinism, bookkeeping, emission formats."""

import json
import math

import numpy as np
import pytest
from scipy import stats

from sketch_infer.errors import DomainError, EmptyInput
from sketch_infer.inference import Regime
from sketch_infer.sim_study import (
    SimConfig,
    ks_statistic,
    run_repeated_sampling,
    run_repeated_sketching,
)
from sketch_infer.sketch_ops import SketchKind


def _small_cfg(regime, m=60, seed=77, kinds=(SketchKind.GAUSSIAN,)):
    return SimConfig(
        n=250, p=4, k=12, m=m, beta0=np.array([2.0, -1.0, 0.0, 1.0]), sigma2=1.0,
        sketch_kinds=kinds, regime=regime, targets=(0, 2), root_seed=seed,
        rep_draws=20_000,
    )


class TestKsStatistic:
    def test_null_draws_small_statistic(self):
        rng = np.random.default_rng(4)
        d, p = ks_statistic(rng.standard_normal(10_000), lambda x: stats.norm.cdf(x))
        assert d < 0.02
        assert 0.0 <= p <= 1.0

    def test_point_mass_at_median(self):
        d, _ = ks_statistic(np.zeros(1000), lambda x: stats.norm.cdf(x))
        assert d == pytest.approx(0.5, abs=1e-3)

    def test_order_invariance(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal(500)
        d1, p1 = ks_statistic(x, lambda v: stats.norm.cdf(v))
        rng.shuffle(x)
        d2, p2 = ks_statistic(x, lambda v: stats.norm.cdf(v))
        assert d1 == d2 and p1 == p2

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            ks_statistic(np.array([]), lambda x: x)


class TestConfig:
    def test_partial_path_needs_wide_sketch(self):
        with pytest.raises(DomainError):
            SimConfig(n=100, p=4, k=7, m=10, beta0=np.zeros(4), sigma2=1.0,
                      sketch_kinds=(SketchKind.GAUSSIAN,), regime=Regime.REPEATED_SKETCH,
                      targets=(0,), root_seed=1)

    def test_target_bounds(self):
        with pytest.raises(DomainError):
            SimConfig(n=100, p=4, k=12, m=10, beta0=np.zeros(4), sigma2=1.0,
                      sketch_kinds=(SketchKind.GAUSSIAN,), regime=Regime.REPEATED_SKETCH,
                      targets=(4,), root_seed=1)

    def test_accepts_string_tags(self):
        cfg = SimConfig(n=100, p=4, k=12, m=10, beta0=np.zeros(4), sigma2=1.0,
                        sketch_kinds=("gaussian", "hadamard"), regime="repeated_sketch",
                        targets=(0,), root_seed=1)
        assert cfg.sketch_kinds == (SketchKind.GAUSSIAN, SketchKind.HADAMARD)
        assert cfg.regime is Regime.REPEATED_SKETCH


class TestRepeatedSketching:
    def test_bit_identical_reports(self):
        a = run_repeated_sketching(_small_cfg(Regime.REPEATED_SKETCH))
        b = run_repeated_sketching(_small_cfg(Regime.REPEATED_SKETCH))
        assert len(a.tables) == len(b.tables)
        for ta, tb in zip(a.tables, b.tables):
            assert ta.name == tb.name and ta.sketch == tb.sketch
            assert np.array_equal(ta.samples, tb.samples)
            assert ta.ks_statistic == tb.ks_statistic

    def test_replicate_accounting(self):
        rep = run_repeated_sketching(_small_cfg(Regime.REPEATED_SKETCH, m=80))
        for t in rep.tables:
            assert t.samples.size + t.n_error == 80
            assert int(t.counts.sum()) == t.samples.size

    def test_single_replicate_has_no_ks(self):
        rep = run_repeated_sketching(_small_cfg(Regime.REPEATED_SKETCH, m=1))
        assert all(t.ks_statistic is None for t in rep.tables)
        assert all(t.samples.size + t.n_error == 1 for t in rep.tables)

    def test_wrong_regime_rejected(self):
        with pytest.raises(DomainError):
            run_repeated_sketching(_small_cfg(Regime.REPEATED_SAMPLE))

    def test_table_lookup_and_fields(self):
        rep = run_repeated_sketching(
            _small_cfg(Regime.REPEATED_SKETCH, kinds=(SketchKind.GAUSSIAN, SketchKind.CLARKSON_WOODRUFF)))
        t = rep.table("beta_s[0]", SketchKind.GAUSSIAN)
        assert t.coverage is not None
        assert t.overlay_x is not None and len(t.overlay_x) == 512
        piv = rep.table("pivot_complete_null[2]", "clarkson_woodruff")
        assert piv.rejection_rate is not None
        with pytest.raises(KeyError):
            rep.table("beta_s[0]", "hadamard")


class TestRepeatedSampling:
    def test_bit_identical_reports(self):
        a = run_repeated_sampling(_small_cfg(Regime.REPEATED_SAMPLE))
        b = run_repeated_sampling(_small_cfg(Regime.REPEATED_SAMPLE))
        for ta, tb in zip(a.tables, b.tables):
            assert np.array_equal(ta.samples, tb.samples)

    def test_collects_error_variance_series(self):
        rep = run_repeated_sampling(_small_cfg(Regime.REPEATED_SAMPLE, m=200))
        s2 = rep.table("sigma2_hat", SketchKind.GAUSSIAN)
        assert s2.samples.size == 200
        se = s2.samples.std() / math.sqrt(200)
        assert abs(s2.samples.mean() - 1.0) < 4 * se


class TestEmission:
    def test_json_and_csv_outputs(self, tmp_path):
        rep = run_repeated_sketching(_small_cfg(Regime.REPEATED_SKETCH, m=40))
        jpath = tmp_path / "report.json"
        rep.write_json(jpath)
        loaded = json.loads(jpath.read_text())
        assert loaded["schema"] == "sketch-infer/1"
        assert loaded["config"]["m"] == 40
        assert len(loaded["tables"]) == len(rep.tables)
        for t in loaded["tables"]:
            if t["counts"] is not None:
                assert sum(t["counts"]) == t["count"]
        paths = rep.write_csvs(tmp_path / "csv")
        assert len(paths) == len(rep.tables)
        header = open(paths[0]).readline().strip()
        assert header == "bin_left,bin_right,count,theory_x,theory_pdf"

    def test_summary_lines(self):
        rep = run_repeated_sketching(_small_cfg(Regime.REPEATED_SKETCH, m=40))
        lines = rep.summary_lines()
        assert len(lines) == len(rep.tables) + 1
        assert "KS" in lines[0]


class TestThreadedReplication:
    def test_thread_pool_matches_serial(self, monkeypatch):
        serial = run_repeated_sketching(_small_cfg(Regime.REPEATED_SKETCH, m=30))
        monkeypatch.setenv("SKETCH_INFER_THREADS", "4")
        threaded = run_repeated_sketching(_small_cfg(Regime.REPEATED_SKETCH, m=30))
        for ta, tb in zip(serial.tables, threaded.tables):
            assert np.array_equal(ta.samples, tb.samples)
