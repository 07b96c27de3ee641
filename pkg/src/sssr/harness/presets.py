"""
Preset experiments at desk scale (100 trials per cell by default).

Shuffle fractions of 25, 33 and 50 percent of N = 121 become 30, 40 and 60
swapped sample indices.
"""

from __future__ import annotations

from .config import ExperimentConfig

__all__ = ["PRESETS", "preset"]

_SNR_SWEEP = [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
_SHUFFLES = [30, 40, 60]


def _fig4(trials, seed):
    return {"fig4": ExperimentConfig(
        kind="spikes", K1=2, K2=2, N=121, snr_db=list(_SNR_SWEEP), shuffled=list(_SHUFFLES),
        trials=trials, seed=seed, known_support=True,
    )}


def _fig5(trials, seed):
    return {"fig5": ExperimentConfig(
        kind="decaying", K1=2, K2=2, N=121, snr_db=list(_SNR_SWEEP), shuffled=list(_SHUFFLES),
        trials=trials, seed=seed, tau_half=0.25, fs=30.0, known_support=True,
    )}


def _fig6(trials, seed):
    common = dict(kind="benchmark", K1=2, K2=2, N=121, trials=trials, seed=seed, tau_half=0.25, fs=30.0)
    return {
        "fig6a": ExperimentConfig(snr_db=[0.0, 10.0, 20.0, 30.0, 40.0, 50.0], shuffled=[12], **common),
        "fig6b": ExperimentConfig(snr_db=[30.0], shuffled=list(range(1, 58, 4)), **common),
    }


def _fig7(trials, seed):
    return {"fig7": ExperimentConfig(
        kind="refinement", K1=2, K2=2, N=121, snr_db=[0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
        shuffled=[40], trials=trials, seed=seed, tau_half=0.25, fs=30.0,
    )}


PRESETS = {"fig4": _fig4, "fig5": _fig5, "fig6": _fig6, "fig7": _fig7}


def preset(name: str, trials: int = 100, seed: int = 0) -> dict[str, ExperimentConfig]:
    """Configs of a named preset, keyed by output sub-directory name."""
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[name](trials, seed)
