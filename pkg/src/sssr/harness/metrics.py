"""
Evaluation metrics.

Every metric resolves the channel-order ambiguity of two-channel recovery by
scoring both orderings and keeping the better one.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import linear_sum_assignment

__all__ = [
    "weighted_accuracy",
    "nmse",
    "reconstruction_nmse",
    "r_squared",
    "support_nmse",
]


def weighted_accuracy(q_hat: ArrayLike, q_true: ArrayLike, x1: ArrayLike, x2: ArrayLike) -> float:
    """
    Fraction of the inter-channel deviation ``|x1 - x2|`` carried by correctly assigned samples.

    Evaluated against ``q_true`` and ``1 - q_true``, the larger value is
    returned. Identical channels make every assignment correct, giving 1.
    """
    q_hat = np.asarray(q_hat).astype(int)
    q_true = np.asarray(q_true).astype(int)
    dev = np.abs(np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float))
    if not (q_hat.shape == q_true.shape == dev.shape):
        raise ValueError("q_hat, q_true, x1 and x2 must share one length")
    total = dev.sum()
    if total == 0:
        return 1.0
    direct = dev[q_hat == q_true].sum()
    flipped = dev[q_hat != q_true].sum()
    return float(max(direct, flipped) / total)


def reconstruction_nmse(x_true: ArrayLike, x_hat: ArrayLike) -> float:
    """
    ``||x - x_hat||^2 / ||x||^2`` for stacked two-channel signals.

    Inputs are (2, N) arrays or stacked length-2N vectors; the channel order of
    ``x_hat`` is taken whichever way gives the smaller error.
    """
    x = np.asarray(x_true, dtype=float).reshape(2, -1)
    xh = np.asarray(x_hat, dtype=float).reshape(2, -1)
    if x.shape != xh.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {xh.shape}")
    energy = np.sum(x**2)
    if energy == 0:
        raise ValueError("nMSE is undefined for an all-zero ground truth")
    direct = np.sum((x - xh) ** 2)
    swapped = np.sum((x - xh[::-1]) ** 2)
    return float(min(direct, swapped) / energy)


def nmse(x_true_stacked: ArrayLike, A_hat: ArrayLike, beta_hat: ArrayLike) -> float:
    """nMSE of the block model ``A_hat @ beta_hat`` against the stacked truth."""
    A = np.asarray(A_hat, dtype=float)
    b = np.asarray(beta_hat, dtype=float)
    x = np.asarray(x_true_stacked, dtype=float).ravel()
    if A.shape != (x.size, b.size):
        raise ValueError(f"dimension mismatch: A {A.shape}, beta {b.shape}, x {x.shape}")
    return reconstruction_nmse(x, A @ b)


def r_squared(x_ref: ArrayLike, x_hat: ArrayLike) -> float:
    """
    Pooled coefficient of determination ``1 - SS_res / SS_tot`` over both channels.

    ``SS_tot`` uses per-channel means of the reference; the better channel
    ordering of the estimate is used.
    """
    x = np.asarray(x_ref, dtype=float).reshape(2, -1)
    xh = np.asarray(x_hat, dtype=float).reshape(2, -1)
    if x.shape != xh.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {xh.shape}")
    ss_tot = np.sum((x - x.mean(axis=1, keepdims=True)) ** 2)
    if ss_tot == 0:
        raise ValueError("R^2 is undefined for constant reference channels")
    ss_res = min(np.sum((x - xh) ** 2), np.sum((x - xh[::-1]) ** 2))
    return float(1.0 - ss_res / ss_tot)


def support_nmse(true_locations: ArrayLike, est_locations: ArrayLike) -> float:
    """
    Normalized squared location error ``sum (t_k - t_hat_k)^2 / sum t_k^2``.

    Estimates are matched to the truth by an optimal assignment under the
    circular distance on the unit period, and the error of each pair is that
    circular distance.
    """
    t = np.asarray(true_locations, dtype=float).ravel()
    th = np.asarray(est_locations, dtype=float).ravel()
    if t.size != th.size or t.size == 0:
        raise ValueError("need equally many true and estimated locations")
    diff = np.abs(t[:, None] - th[None, :])
    dist = np.minimum(diff, 1.0 - diff)
    rows, cols = linear_sum_assignment(dist**2)
    denom = np.sum(t**2)
    if denom == 0:
        raise ValueError("support nMSE is undefined when all true locations are 0")
    return float(np.sum(dist[rows, cols] ** 2) / denom)
