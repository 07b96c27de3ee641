"""
Experiment configuration.

Configs are flat YAML mappings whose keys are the fields of
:class:`ExperimentConfig`; unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from ..exceptions import ConfigError
from ..signal_model import DecayingExponential, Dirac, ModelKind, alpha_from_halflife

__all__ = ["KINDS", "ExperimentConfig", "load_config"]

KINDS = ("spikes", "decaying", "benchmark", "refinement", "real-traces", "theory-sweep")


@dataclass
class ExperimentConfig:
    """
    Parameters of one Monte-Carlo experiment.

    ``shuffled`` lists shuffle counts (sample indices whose two values are
    exchanged); ``shuffle_fractions`` is an alternative given as fractions of
    ``N`` and rounded to the nearest count. ``snr_db`` entries may be None for
    noiseless cells. The decay rate is ``alpha`` when set, otherwise it is
    derived from ``tau_half`` and ``fs``.
    """

    kind: str = "spikes"
    K1: int = 2
    K2: int = 2
    N: int = 121
    snr_db: list = field(default_factory=lambda: [20.0])
    shuffled: Optional[list] = None
    shuffle_fractions: Optional[list] = None
    trials: int = 100
    seed: int = 0
    min_separation: float = 0.02
    weight_range: tuple = (0.5, 1.0)
    alpha: Optional[float] = None
    tau_half: float = 0.25
    fs: float = 30.0
    max_iters: int = 20
    nonnegative: bool = False
    n_starts: int = 20
    sign_start: bool = True
    known_support: bool = False
    hardem_restarts: int = 10
    output: Optional[str] = None
    workers: int = 1
    record_timing: bool = False
    # real-traces
    input: Optional[str] = None
    baseline_quantile: Optional[float] = 0.1
    alpha_range: tuple = (1.0, 50.0)
    # theory-sweep
    K: Optional[int] = None
    n_matrices: int = 20

    def __post_init__(self):
        self.validate()

    @property
    def K_total(self) -> int:
        return self.K if self.K is not None else self.K1 + self.K2

    def shuffle_counts(self) -> list[int]:
        if self.shuffled is not None:
            return [int(s) for s in self.shuffled]
        return [int(round(f * self.N)) for f in self.shuffle_fractions]

    def model(self) -> ModelKind:
        if self.kind == "spikes":
            return Dirac()
        return DecayingExponential(self.decay_rate())

    def decay_rate(self) -> float:
        if self.alpha is not None:
            return float(self.alpha)
        return alpha_from_halflife(self.tau_half, self.fs, self.N)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {', '.join(KINDS)}; got {self.kind!r}")
        _int_at_least("trials", self.trials, 1)
        _int_at_least("N", self.N, 2)
        _int_at_least("max_iters", self.max_iters, 1)
        _int_at_least("n_starts", self.n_starts, 1)
        _int_at_least("workers", self.workers, 1)
        _int_at_least("hardem_restarts", self.hardem_restarts, 1)
        _int_at_least("n_matrices", self.n_matrices, 1)
        if not isinstance(self.sign_start, bool):
            raise ConfigError(f"sign_start must be true or false, got {self.sign_start!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.kind == "theory-sweep":
            if self.K is None:
                raise ConfigError("theory-sweep needs K")
            _int_at_least("K", self.K, 1)
            if self.K > self.N:
                raise ConfigError(f"K={self.K} exceeds N={self.N}")
            if 2 * self.N > 64:
                raise ConfigError("theory-sweep needs 2N <= 64")
            return
        if self.N % 2 == 0:
            raise ConfigError(f"N must be odd, got {self.N}")
        if self.K is not None:
            _int_at_least("K", self.K, 1)
        if self.kind != "real-traces":
            _int_at_least("K1", self.K1, 1)
            _int_at_least("K2", self.K2, 1)
            if self.N < 2 * self.K_total:
                raise ConfigError(f"N={self.N} is too small for K1+K2={self.K_total}")
            if not self.min_separation >= 0 or self.min_separation * self.K_total >= 1:
                raise ConfigError("min_separation must satisfy 0 <= dt and dt * (K1 + K2) < 1")
            lo, hi = _pair("weight_range", self.weight_range)
            if not lo <= hi:
                raise ConfigError(f"weight_range must be increasing, got {self.weight_range!r}")
            self.weight_range = (lo, hi)
        if (self.shuffled is None) == (self.shuffle_fractions is None):
            raise ConfigError("set exactly one of shuffled and shuffle_fractions")
        if self.shuffled is not None:
            self.shuffled = _as_list("shuffled", self.shuffled)
            for s in self.shuffled:
                if not isinstance(s, int) or isinstance(s, bool):
                    raise ConfigError(f"shuffle counts must be integers, got {s!r}")
        else:
            self.shuffle_fractions = _as_list("shuffle_fractions", self.shuffle_fractions)
            for f in self.shuffle_fractions:
                if not isinstance(f, (int, float)) or not 0 <= f <= 1:
                    raise ConfigError(f"shuffle fractions must lie in [0, 1], got {f!r}")
        if self.kind != "real-traces":
            for s in self.shuffle_counts():
                if not 0 <= s <= self.N:
                    raise ConfigError(f"shuffle count {s} outside [0, N={self.N}]")
        self.snr_db = _as_list("snr_db", self.snr_db)
        for s in self.snr_db:
            if s is not None and (not isinstance(s, (int, float)) or isinstance(s, bool)):
                raise ConfigError(f"snr_db entries must be numbers or null, got {s!r}")
        if self.alpha is not None and not (isinstance(self.alpha, (int, float)) and self.alpha > 0):
            raise ConfigError(f"alpha must be positive, got {self.alpha!r}")
        if not (self.tau_half > 0 and self.fs > 0):
            raise ConfigError("tau_half and fs must be positive")
        if self.baseline_quantile is not None and not 0 <= self.baseline_quantile <= 1:
            raise ConfigError("baseline_quantile must lie in [0, 1]")
        lo, hi = _pair("alpha_range", self.alpha_range)
        if not 0 < lo < hi:
            raise ConfigError(f"alpha_range must satisfy 0 < lo < hi, got {self.alpha_range!r}")
        self.alpha_range = (lo, hi)
        if self.kind == "real-traces":
            if self.input is None:
                raise ConfigError("real-traces needs an input CSV path")
            if self.K is None:
                raise ConfigError("real-traces needs the total spike count K")

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping of keys to values")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_mapping(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("weight_range", "alpha_range"):
            out[key] = list(out[key])
        return out


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return ExperimentConfig.from_mapping(data or {})


def _int_at_least(name, value, low):
    if not isinstance(value, int) or isinstance(value, bool) or value < low:
        raise ConfigError(f"{name} must be an integer >= {low}, got {value!r}")


def _pair(name, value):
    try:
        lo, hi = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a pair of numbers, got {value!r}") from None
    return lo, hi


def _as_list(name, value):
    if isinstance(value, (list, tuple)):
        return list(value)
    if value is None or isinstance(value, (int, float)):
        return [value]
    raise ConfigError(f"{name} must be a list, got {value!r}")
