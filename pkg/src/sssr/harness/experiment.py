"""
Monte-Carlo experiment runner.

Every trial ``t`` draws from its own streams spawned from
``SeedSequence([seed, t])``: one for the signal, one for the noise, one for the
shuffle and one for the solver. Trial ``t`` therefore sees the same signal (and
the same unit-variance noise draw) in every (SNR, shuffle) cell, which pairs
the cells, and the output does not depend on execution order or on the
number of worker processes.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..baselines import hard_em, oracle_known_assignment
from ..exceptions import ConfigError, RankDeficientError, SingularModelError
from ..recovery import SssrResult, _block, refine, run
from ..shuffle import TwoChannelMask, apply, random_assignment
from ..signal_model import (
    DecayingExponential,
    DiracStream,
    MultiChannelFrame,
    add_noise,
    synthesize,
)
from ..spectral import estimate_alpha
from ..theory import proposition1_sweep
from .config import ExperimentConfig
from .metrics import r_squared, reconstruction_nmse, support_nmse, weighted_accuracy
from .traces import ingest_traces

__all__ = [
    "RAW_HEADER",
    "SUMMARY_HEADER",
    "THEORY_HEADER",
    "PERCENTILES",
    "METRICS",
    "TrialRecord",
    "SummaryRow",
    "ExperimentResult",
    "draw_support",
    "methods_for",
    "run_experiment",
    "summarize",
    "write_outputs",
    "format_float",
]

RAW_HEADER = ["trial", "seed", "snr_db", "shuffled", "wa", "nmse", "r2", "support_nmse", "iters", "ms"]
SUMMARY_HEADER = ["snr_db", "shuffled", "metric", "p05", "p10", "p25", "p50", "p75", "p90", "p95"]
THEORY_HEADER = ["N", "K", "r", "expected_unique", "unique_verdicts", "matrices", "witnesses_verified", "match"]
PERCENTILES = (5, 10, 25, 50, 75, 90, 95)
METRICS = ("wa", "nmse", "r2", "support_nmse")
MAX_REJECTIONS = 100_000

_NUMERICAL = (SingularModelError, RankDeficientError, np.linalg.LinAlgError, ValueError, FloatingPointError)


@dataclass
class TrialRecord:
    trial: int
    seed: int
    snr_db: Optional[float]
    shuffled: int
    wa: float = math.nan
    nmse: float = math.nan
    r2: float = math.nan
    support_nmse: float = math.nan
    iterations: Optional[int] = None
    wall_time_ms: Optional[float] = None


@dataclass
class SummaryRow:
    snr_db: Optional[float]
    shuffled: int
    metric: str
    values: tuple


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: dict
    summaries: dict
    failures: int = 0
    notes: list = field(default_factory=list)
    theory_rows: list = field(default_factory=list)


def format_float(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    return "%.9g" % v


def _snr_field(snr) -> str:
    return "inf" if snr is None else format_float(snr)


def draw_support(rng: np.random.Generator, K: int, min_separation: float) -> np.ndarray:
    """
    K uniform locations on [0, 1) with pairwise circular distance at least ``min_separation``.

    Uses rejection sampling with a cap of 1e5 attempts.
    """
    for _ in range(MAX_REJECTIONS):
        t = rng.uniform(0.0, 1.0, K)
        if K == 1:
            return t
        s = np.sort(t)
        gaps = np.diff(np.append(s, s[0] + 1.0))
        if gaps.min() >= min_separation:
            return t
    raise ConfigError(f"could not place {K} locations with separation {min_separation} in {MAX_REJECTIONS} draws")


def methods_for(config: ExperimentConfig) -> list[str]:
    if config.kind in ("spikes", "decaying"):
        return ["sssr", "known_support"] if config.known_support else ["sssr"]
    if config.kind == "benchmark":
        return ["sssr", "hardem"]
    if config.kind == "refinement":
        return ["sssr", "refined", "oracle"]
    if config.kind == "real-traces":
        return ["sssr"]
    return []


def _streams(seed: int, t: int):
    sig, noise, shuf, solver = np.random.SeedSequence([seed, t]).spawn(4)
    return np.random.default_rng(sig), np.random.default_rng(noise), np.random.default_rng(shuf), solver


def _timed(fn, record_timing):
    t0 = time.perf_counter()
    out = fn()
    return out, ((time.perf_counter() - t0) * 1e3 if record_timing else None)


def _score(rec: TrialRecord, res: SssrResult, x: np.ndarray, q_true, locs=None) -> None:
    rec.wa = weighted_accuracy(res.assignment.q, q_true, x[0], x[1])
    rec.nmse = reconstruction_nmse(x, res.reconstructed.channels)
    if locs is not None:
        rec.support_nmse = support_nmse(locs, res.locations)
    rec.iterations = res.best_iteration + 1


def _synthetic_trial(config: ExperimentConfig, snr, shuffled: int, t: int) -> dict:
    kind = config.model()
    K1, K2, N = config.K1, config.K2, config.N
    K = K1 + K2
    sig_rng, noise_rng, shuf_rng, solver_ss = _streams(config.seed, t)
    locs = draw_support(sig_rng, K, config.min_separation)
    order = sig_rng.permutation(K)
    weights = sig_rng.uniform(*config.weight_range, size=K)
    s1 = DiracStream(locs[order[:K1]], weights[order[:K1]])
    s2 = DiracStream(locs[order[K1:]], weights[order[K1:]])
    x = np.vstack([synthesize(s1, kind, N), synthesize(s2, kind, N)])
    noisy = add_noise(MultiChannelFrame(x, kind, truth=(s1, s2)), snr, noise_rng)
    assignment = random_assignment(2, N, shuffled, shuf_rng)
    q_true = TwoChannelMask.from_assignment(assignment).q
    y = apply(assignment, noisy.channels)

    def solver_rng():
        return np.random.default_rng(solver_ss)

    opts = dict(
        max_iters=config.max_iters, nonnegative=config.nonnegative, n_starts=config.n_starts,
        sign_start=config.sign_start,
    )
    out = {}

    def new_record():
        return TrialRecord(trial=t, seed=config.seed, snr_db=snr, shuffled=shuffled)

    rec = new_record()
    out["sssr"] = rec
    try:
        res, rec.wall_time_ms = _timed(lambda: run(y[0], y[1], K, kind, seed=solver_rng(), **opts), config.record_timing)
        _score(rec, res, x, q_true, locs)
    except ConfigError:
        raise
    except _NUMERICAL:
        res = None

    if config.kind in ("spikes", "decaying") and config.known_support:
        rec = out["known_support"] = new_record()
        try:
            known, rec.wall_time_ms = _timed(
                lambda: run(y[0], y[1], K, kind, locations=np.sort(locs), seed=solver_rng(), **opts),
                config.record_timing,
            )
            _score(rec, known, x, q_true, locs)
        except _NUMERICAL:
            pass

    if config.kind == "benchmark":
        rec = out["hardem"] = new_record()
        if res is not None:
            try:
                A = _block(res.sensing.matrix)
                fit, rec.wall_time_ms = _timed(
                    lambda: hard_em(A, y.ravel(), restarts=config.hardem_restarts, seed=solver_rng()),
                    config.record_timing,
                )
                rec.nmse = reconstruction_nmse(x, A @ fit.coefficients)
                rec.support_nmse = support_nmse(locs, res.locations)
                rec.iterations = fit.iterations
            except _NUMERICAL:
                pass

    if config.kind == "refinement":
        rec = out["refined"] = new_record()
        if res is not None:
            try:
                ref, rec.wall_time_ms = _timed(
                    lambda: refine(res, y[0], y[1], K, kind, orders=(K1, K2), seed=solver_rng(), **opts),
                    config.record_timing,
                )
                _score(rec, ref, x, q_true, locs)
            except _NUMERICAL:
                pass
        rec = out["oracle"] = new_record()
        try:
            orc, rec.wall_time_ms = _timed(
                lambda: oracle_known_assignment(
                    y[0], y[1], q_true, K, kind, orders=(K1, K2), nonnegative=config.nonnegative
                ),
                config.record_timing,
            )
            _score(rec, orc, x, q_true, locs)
        except _NUMERICAL:
            pass
    return out


def _trace_trial(config: ExperimentConfig, traces: np.ndarray, snr, shuffled: int, t: int) -> dict:
    sig_rng, noise_rng, shuf_rng, solver_ss = _streams(config.seed, t)
    M, N = traces.shape
    if not 0 <= shuffled <= N:
        raise ConfigError(f"shuffle count {shuffled} outside [0, N={N}]")
    pick = sig_rng.choice(M, size=2, replace=False)
    x = traces[pick]
    noisy = add_noise(MultiChannelFrame(x), snr, noise_rng)
    assignment = random_assignment(2, N, shuffled, shuf_rng)
    q_true = TwoChannelMask.from_assignment(assignment).q
    y = apply(assignment, noisy.channels)
    rec = TrialRecord(trial=t, seed=config.seed, snr_db=snr, shuffled=shuffled)
    alpha = np.nan
    try:
        def solve():
            a = config.alpha if config.alpha is not None else estimate_alpha(y[0] + y[1], config.K, config.alpha_range)
            r = run(
                y[0], y[1], config.K, DecayingExponential(a),
                max_iters=config.max_iters, nonnegative=config.nonnegative,
                n_starts=config.n_starts, sign_start=config.sign_start, seed=np.random.default_rng(solver_ss),
            )
            return a, r

        (alpha, res), rec.wall_time_ms = _timed(solve, config.record_timing)
        rec.wa = weighted_accuracy(res.assignment.q, q_true, x[0], x[1])
        rec.r2 = r_squared(x, res.reconstructed.channels)
        rec.iterations = res.best_iteration + 1
    except ConfigError:
        raise
    except _NUMERICAL:
        pass
    return {"sssr": rec, "_alpha": alpha}


def _task(args):
    config, traces, snr, shuffled, t = args
    if config.kind == "real-traces":
        return _trace_trial(config, traces, snr, shuffled, t)
    return _synthetic_trial(config, snr, shuffled, t)


def _round9(v: float) -> float:
    return float("%.9g" % v)


def summarize(records: list[TrialRecord], config: ExperimentConfig) -> list[SummaryRow]:
    """
    Percentiles per (SNR, shuffle) cell of every metric that has values.

    Values are rounded to the printed precision first, so the summary can be
    recomputed exactly from the raw CSV.
    """
    rows = []
    cells = {}
    for r in records:
        cells.setdefault((r.snr_db, r.shuffled), []).append(r)
    for (snr, shuffled), recs in cells.items():
        for metric in METRICS:
            vals = np.array([_round9(getattr(r, metric)) for r in recs if not math.isnan(getattr(r, metric))])
            if vals.size == 0:
                continue
            rows.append(SummaryRow(snr, shuffled, metric, tuple(np.percentile(vals, PERCENTILES))))
    return rows


def _cells(config: ExperimentConfig):
    return [(snr, s) for snr in config.snr_db for s in config.shuffle_counts()]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Run every trial of every (SNR, shuffle) cell and summarize.

    Trials whose solver fails numerically keep empty metric fields and are
    counted in ``failures``. ``config.workers > 1`` spreads trials over
    processes without changing the results.
    """
    if config.kind == "theory-sweep":
        rows = proposition1_sweep(config.N, config.K, seed=config.seed, n_matrices=config.n_matrices)
        return ExperimentResult(config, {}, {}, theory_rows=rows)
    traces = None
    notes = []
    if config.kind == "real-traces":
        frame = ingest_traces(config.input, config.baseline_quantile)
        traces = frame.channels
        if traces.shape[1] % 2 == 0:
            raise ConfigError(f"traces must have an odd number of samples, got {traces.shape[1]}")
        if traces.shape[1] < 2 * config.K:
            raise ConfigError(f"traces of {traces.shape[1]} samples are too short for K={config.K}")
        notes.append(f"loaded {traces.shape[0]} traces of {traces.shape[1]} samples from {config.input}")
    tasks = [(config, traces, snr, s, t) for snr, s in _cells(config) for t in range(config.trials)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outs = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * config.workers))))
    else:
        outs = [_task(a) for a in tasks]
    methods = methods_for(config)
    records = {m: [o[m] for o in outs] for m in methods}
    failures = sum(1 for m in methods for r in records[m] if all(math.isnan(getattr(r, k)) for k in METRICS))
    if config.kind == "real-traces":
        alphas = np.array([o["_alpha"] for o in outs], dtype=float)
        alphas = alphas[np.isfinite(alphas)]
        if alphas.size:
            a = float(np.median(alphas))
            tau = math.log(2.0) * traces.shape[1] / (a * config.fs)
            notes.append(f"median alpha estimate {a:.4f} (half-life {tau:.3f} s at fs={config.fs:g} Hz)")
    summaries = {m: summarize(records[m], config) for m in methods}
    return ExperimentResult(config, records, summaries, failures, notes)


def raw_csv(records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_HEADER)
    for r in records:
        w.writerow([
            r.trial, r.seed, _snr_field(r.snr_db), r.shuffled,
            format_float(r.wa), format_float(r.nmse), format_float(r.r2), format_float(r.support_nmse),
            "" if r.iterations is None else r.iterations,
            format_float(r.wall_time_ms),
        ])
    return buf.getvalue()


def summary_csv(rows: list[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in rows:
        w.writerow([_snr_field(r.snr_db), r.shuffled, r.metric, *(format_float(v) for v in r.values)])
    return buf.getvalue()


def theory_csv(config: ExperimentConfig, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(THEORY_HEADER)
    for r in rows:
        w.writerow([
            config.N, config.K, r.r, int(r.expected_unique), sum(r.verdicts), len(r.verdicts),
            r.witnesses_verified, int(r.matches),
        ])
    return buf.getvalue()


def write_outputs(result: ExperimentResult, output_dir) -> list[Path]:
    """Write ``raw_<method>.csv`` and ``summary_<method>.csv`` (or ``theory.csv``)."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if result.config.kind == "theory-sweep":
        p = out / "theory.csv"
        p.write_text(theory_csv(result.config, result.theory_rows))
        return [p]
    for method, recs in result.records.items():
        p = out / f"raw_{method}.csv"
        p.write_text(raw_csv(recs))
        written.append(p)
        p = out / f"summary_{method}.csv"
        p.write_text(summary_csv(result.summaries[method]))
        written.append(p)
    return written
