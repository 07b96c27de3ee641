"""Exception and warning types shared across the package."""

import numpy as np


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class SingularModelError(ValueError):
    """The spectral model degenerated (e.g. annihilating filter with vanishing lead)."""


class RankDeficientError(np.linalg.LinAlgError):
    """A design or sensing matrix does not have full column rank."""


class ConvergenceWarning(RuntimeWarning):
    """An iterative routine stopped at its iteration cap."""
