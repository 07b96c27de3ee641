"""
Command line entry point.

Exit status is 0 on success, 2 for configuration or input errors and 3 for
numerical failures.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..exceptions import ConfigError, RankDeficientError, SingularModelError
from .config import ExperimentConfig, load_config
from .experiment import run_experiment, write_outputs
from .presets import PRESETS, preset

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class NumericalFailure(RuntimeError):
    pass


def _report(result, written) -> None:
    for note in result.notes:
        print(note)
    for p in written:
        print(f"wrote {p}")
    if result.failures:
        print(f"warning: {result.failures} trial(s) failed numerically; their metrics are left empty", file=sys.stderr)


def _print_summary(result) -> None:
    for method, rows in result.summaries.items():
        for r in rows:
            if r.metric in ("wa", "nmse", "r2"):
                snr = "inf" if r.snr_db is None else f"{r.snr_db:g}"
                print(f"{method:>13} snr={snr:>5} shuffled={r.shuffled:>3} {r.metric:>4} median={r.values[3]:.4g}")


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        config.workers = args.workers
    output = args.output or config.output or "results"
    result = run_experiment(config)
    _report(result, write_outputs(result, output))
    if config.kind == "theory-sweep" and not all(r.matches for r in result.theory_rows):
        raise NumericalFailure("uniqueness verdicts disagree with the expected condition")
    return EXIT_OK


def _parse_assignments(tokens: Sequence[str]) -> dict:
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep or key not in ("N", "K"):
            raise ConfigError(f"expected N=<int> or K=<int>, got {tok!r}")
        try:
            out[key] = int(value)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {value!r}") from None
    if set(out) != {"N", "K"}:
        raise ConfigError("--sweep needs both N=<int> and K=<int>")
    return out


def _cmd_theory(args) -> int:
    sweep = _parse_assignments(args.sweep)
    config = ExperimentConfig(
        kind="theory-sweep", N=sweep["N"], K=sweep["K"], seed=args.seed, n_matrices=args.matrices
    )
    result = run_experiment(config)
    print(f"N={config.N} K={config.K}: unique iff K <= max(r, N - r)")
    print("  r  expected  unique/draws  witnesses  match")
    for r in result.theory_rows:
        print(
            f"{r.r:>3}  {str(r.expected_unique):>8}  {sum(r.verdicts):>5}/{len(r.verdicts):<6}"
            f"  {r.witnesses_verified:>9}  {'yes' if r.matches else 'NO'}"
        )
    if args.output:
        _report(result, write_outputs(result, args.output))
    if not all(r.matches for r in result.theory_rows):
        raise NumericalFailure("uniqueness verdicts disagree with the expected condition")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    config = ExperimentConfig(
        kind="real-traces",
        input=args.input,
        K=args.K,
        shuffled=[args.shuffle],
        snr_db=[None],
        trials=args.trials,
        seed=args.seed,
        alpha=args.alpha,
        fs=args.fs,
        nonnegative=not args.allow_negative,
        baseline_quantile=None if args.no_baseline else args.baseline_quantile,
        max_iters=args.max_iters,
        N=121,
    )
    result = run_experiment(config)
    for r in result.records["sssr"]:
        r2 = "failed" if math.isnan(r.r2) else f"{r.r2:.4f}"
        wa = "failed" if math.isnan(r.wa) else f"{r.wa:.4f}"
        print(f"trial {r.trial}: shuffled={r.shuffled} R2={r2} WA={wa}")
    written = write_outputs(result, args.output) if args.output else []
    _report(result, written)
    if result.failures == len(result.records["sssr"]):
        raise NumericalFailure("recovery failed on every trial")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    base = Path(args.output or "results")
    for name, config in preset(args.figure, trials=args.trials, seed=args.seed).items():
        config.workers = args.workers
        result = run_experiment(config)
        _report(result, write_outputs(result, base / name))
        if not args.quiet:
            _print_summary(result)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sssr", description="Shuffled two-channel sparse signal recovery experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment described by a config file")
    r.add_argument("--config", required=True, help="flat YAML config")
    r.add_argument("--output", help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, help="worker processes")
    r.set_defaults(func=_cmd_run)

    t = sub.add_parser("theory", help="two-channel uniqueness sweep over the number of unshuffled samples")
    t.add_argument("--sweep", nargs=2, required=True, metavar="KEY=INT", help="e.g. N=6 K=4")
    t.add_argument("--matrices", type=int, default=20, help="random matrices per r (default 20)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--output", help="directory for theory.csv")
    t.set_defaults(func=_cmd_theory)

    g = sub.add_parser("ingest", help="shuffle recorded traces artificially and recover them")
    g.add_argument("--input", required=True, help="CSV, one column per trace, one row per sample")
    g.add_argument("--shuffle", type=int, required=True, help="number of sample indices to swap")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--K", type=int, default=4, help="total number of spikes in the two traces (default 4)")
    g.add_argument("--alpha", type=float, help="decay rate; estimated from the summed traces if omitted")
    g.add_argument("--fs", type=float, default=30.0, help="sampling rate in Hz, for reporting the half-life")
    g.add_argument("--trials", type=int, default=1)
    g.add_argument("--max-iters", type=int, default=20)
    g.add_argument("--baseline-quantile", type=float, default=0.1)
    g.add_argument("--no-baseline", action="store_true", help="skip baseline subtraction")
    g.add_argument("--allow-negative", action="store_true", help="do not constrain spike weights to be nonnegative")
    g.add_argument("--output", help="directory for raw/summary CSVs")
    g.set_defaults(func=_cmd_ingest)

    f = sub.add_parser("reproduce", help="run a preset experiment")
    f.add_argument("figure", choices=sorted(PRESETS))
    f.add_argument("--trials", type=int, default=100)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--workers", type=int, default=1)
    f.add_argument("--output", help="base output directory (default ./results)")
    f.add_argument("--quiet", action="store_true", help="do not print median summaries")
    f.set_defaults(func=_cmd_reproduce)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, SingularModelError, RankDeficientError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
