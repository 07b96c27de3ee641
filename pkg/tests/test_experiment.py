"""Tests for the Monte-Carlo runner and its CSV output."""

import csv
import math

import numpy as np
import pytest

from sssr.exceptions import ConfigError
from sssr.harness.config import ExperimentConfig
from sssr.harness.experiment import (
    PERCENTILES,
    RAW_HEADER,
    SUMMARY_HEADER,
    draw_support,
    methods_for,
    run_experiment,
    write_outputs,
)
from sssr.harness.traces import write_traces
from sssr.signal_model import DecayingExponential, DiracStream, synthesize


def small(**kw):
    d = dict(kind="spikes", N=41, shuffled=[5], snr_db=[30.0], trials=3, seed=7, max_iters=5)
    d.update(kw)
    return ExperimentConfig(**d)


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestDrawSupport:
    def test_separation(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            t = np.sort(draw_support(rng, 4, 0.1))
            assert np.diff(np.append(t, t[0] + 1)).min() >= 0.1
            assert np.all((t >= 0) & (t < 1))

    def test_impossible(self):
        with pytest.raises(ConfigError):
            draw_support(np.random.default_rng(0), 3, 0.34)


class TestMethods:
    @pytest.mark.parametrize(
        "kind,extra,expected",
        [
            ("spikes", {}, ["sssr"]),
            ("spikes", {"known_support": True}, ["sssr", "known_support"]),
            ("benchmark", {}, ["sssr", "hardem"]),
            ("refinement", {}, ["sssr", "refined", "oracle"]),
        ],
    )
    def test_lists(self, kind, extra, expected):
        assert methods_for(small(kind=kind, **extra)) == expected


class TestRunExperiment:
    def test_records_per_cell(self):
        cfg = small(snr_db=[10.0, 30.0], shuffled=[0, 5])
        res = run_experiment(cfg)
        recs = res.records["sssr"]
        assert len(recs) == 2 * 2 * 3
        assert {(r.snr_db, r.shuffled) for r in recs} == {(10.0, 0), (10.0, 5), (30.0, 0), (30.0, 5)}
        assert all(0 <= r.wa <= 1 and r.nmse >= 0 for r in recs)

    def test_noiseless_cell_exact(self):
        res = run_experiment(ExperimentConfig(kind="spikes", snr_db=[None], shuffle_fractions=[0.5], trials=5))
        assert all(r.nmse <= 1e-9 and r.wa == 1.0 for r in res.records["sssr"])

    def test_reproducible_and_worker_independent(self, tmp_path):
        a = run_experiment(small())
        b = run_experiment(small(workers=2))
        pa = write_outputs(a, tmp_path / "a")
        pb = write_outputs(b, tmp_path / "b")
        assert [p.read_bytes() for p in pa] == [p.read_bytes() for p in pb]

    def test_trials_share_signals_across_cells(self):
        res = run_experiment(small(shuffled=[0], snr_db=[None, 60.0], trials=2, kind="refinement"))
        oracle = {(r.snr_db, r.trial): r.support_nmse for r in res.records["oracle"]}
        for t in range(2):
            assert oracle[(None, t)] <= 1e-20
            assert oracle[(60.0, t)] < 1e-6

    def test_benchmark_and_refinement_methods(self):
        bench = run_experiment(small(kind="benchmark", trials=2))
        assert all(not math.isnan(r.nmse) for r in bench.records["hardem"])
        ref = run_experiment(small(kind="refinement", trials=2))
        assert set(ref.records) == {"sssr", "refined", "oracle"}

    def test_timing_only_on_request(self):
        assert all(r.wall_time_ms is None for r in run_experiment(small()).records["sssr"])
        assert all(r.wall_time_ms > 0 for r in run_experiment(small(record_timing=True)).records["sssr"])

    def test_zero_trials_rejected(self):
        with pytest.raises(ConfigError):
            small(trials=0)

    def test_theory_sweep(self):
        res = run_experiment(ExperimentConfig(kind="theory-sweep", N=6, K=4, n_matrices=2))
        assert [r.r for r in res.theory_rows] == list(range(7))
        assert all(r.matches for r in res.theory_rows)


class TestCsv:
    def test_schemas(self, tmp_path):
        res = run_experiment(small(snr_db=[None, 20.0]))
        write_outputs(res, tmp_path)
        raw = read(tmp_path / "raw_sssr.csv")
        summary = read(tmp_path / "summary_sssr.csv")
        assert raw[0] == RAW_HEADER
        assert summary[0] == SUMMARY_HEADER
        assert {row[2] for row in raw[1:]} == {"inf", "20"}
        assert all(row[9] == "" for row in raw[1:])
        assert all(row[6] == "" for row in raw[1:])

    def test_summary_recomputes_from_raw(self, tmp_path):
        res = run_experiment(small(shuffled=[3, 8], trials=6))
        write_outputs(res, tmp_path)
        raw = read(tmp_path / "raw_sssr.csv")
        col = {name: i for i, name in enumerate(raw[0])}
        for row in read(tmp_path / "summary_sssr.csv")[1:]:
            snr, shuffled, metric = row[:3]
            vals = [
                float(r[col[metric]]) for r in raw[1:]
                if r[col["snr_db"]] == snr and r[col["shuffled"]] == shuffled and r[col[metric]] != ""
            ]
            expected = ["%.9g" % v for v in np.percentile(vals, PERCENTILES)]
            assert row[3:] == expected

    def test_theory_csv(self, tmp_path):
        res = run_experiment(ExperimentConfig(kind="theory-sweep", N=6, K=2, n_matrices=1))
        (p,) = write_outputs(res, tmp_path)
        rows = read(p)
        assert rows[0][:3] == ["N", "K", "r"]
        assert len(rows) == 8


class TestRealTraces:
    def traces(self, tmp_path, N=61):
        kind = DecayingExponential(8.0)
        x = np.vstack([
            synthesize(DiracStream([0.2, 0.6], [1.0, 0.7]), kind, N),
            synthesize(DiracStream([0.35, 0.8], [0.8, 0.9]), kind, N),
        ])
        p = tmp_path / "traces.csv"
        write_traces(p, x)
        return p

    def test_runs_and_reports_alpha(self, tmp_path):
        p = self.traces(tmp_path)
        cfg = ExperimentConfig(
            kind="real-traces", input=str(p), K=4, shuffled=[10], snr_db=[None], trials=2,
            baseline_quantile=None, nonnegative=True,
        )
        res = run_experiment(cfg)
        recs = res.records["sssr"]
        assert all(r.r2 > 0.99 and r.wa > 0.9 for r in recs)
        assert any("median alpha estimate" in n for n in res.notes)

    def test_even_length_rejected(self, tmp_path):
        p = tmp_path / "t.csv"
        write_traces(p, np.random.default_rng(0).standard_normal((2, 40)))
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig(kind="real-traces", input=str(p), K=2, shuffled=[4]))
