"""
Recovery of sparse multi-channel signals whose samples were shuffled across channels.

Submodules
----------
signal_model
    Dirac and decaying-exponential streams, synthesis, sensing matrices, noise.
shuffle
    Cross-channel shuffles as per-sample permutation tensors and two-channel masks.
spectral
    Support estimation: Cadzow denoising, Prony's method, decay compensation.
robust
    MM-estimation of linear regression with Tukey's bisquare.
recovery
    The two-step recovery loop and its refinement pass.
baselines
    HardEM and oracle estimators.
theory
    Genericity and uniqueness checks at small scale.
harness
    Metrics, configuration, Monte-Carlo runner, trace I/O and the command line.
"""

from . import baselines, recovery, robust, shuffle, signal_model, spectral, theory
from .exceptions import ConfigError, ConvergenceWarning, RankDeficientError, SingularModelError
from .recovery import SssrResult, refine, run
from .shuffle import ShuffleAssignment, TwoChannelMask
from .signal_model import (
    DecayingExponential,
    Dirac,
    DiracStream,
    MultiChannelFrame,
    SamplingConfig,
    SensingModel,
)

__version__ = "0.1.0"

__all__ = [
    "baselines",
    "recovery",
    "robust",
    "shuffle",
    "signal_model",
    "spectral",
    "theory",
    "ConfigError",
    "ConvergenceWarning",
    "RankDeficientError",
    "SingularModelError",
    "SssrResult",
    "refine",
    "run",
    "ShuffleAssignment",
    "TwoChannelMask",
    "DecayingExponential",
    "Dirac",
    "DiracStream",
    "MultiChannelFrame",
    "SamplingConfig",
    "SensingModel",
]
