"""
Reference solvers.

:func:`hard_em` is alternating minimization for shuffled regression under an
unrestricted permutation; it ignores that samples can only move between
channels. The two oracles remove one source of difficulty each (the shuffle
or the support) and bound what the full method can achieve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import nnls

from .exceptions import RankDeficientError
from .recovery import SssrResult, _block, _check_inputs, _frame, run
from .shuffle import TwoChannelMask, apply_mask
from .signal_model import Dirac, ModelKind, build_sensing_matrix
from .spectral import estimate_support

__all__ = ["HardEmResult", "hard_em", "oracle_known_assignment", "oracle_known_support"]


@dataclass
class HardEmResult:
    coefficients: NDArray[np.float64]
    objective: float
    permutation: NDArray[np.int64]
    objective_trace: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.objective_trace)


def hard_em(
    design: ArrayLike,
    response: ArrayLike,
    restarts: int = 10,
    max_iters: int = 100,
    seed=None,
) -> HardEmResult:
    """
    Shuffled linear regression by alternating least squares and sorting.

    Each restart alternates ``beta <- argmin ||y_pi - X beta||`` with the
    optimal one-dimensional matching of responses to predictions, which for
    squared loss pairs them in sorted order. The first restart starts from the
    identity correspondence, later ones from uniform random permutations.

    Parameters
    ----------
    design : array_like, shape (n, P)
    response : array_like, shape (n,)
    restarts : int
        Number of starting permutations.
    max_iters : int
        Alternations per restart; a restart also stops once the matching repeats.
    seed : int or numpy.random.Generator, optional

    Returns
    -------
    HardEmResult
        The best restart. ``permutation[i]`` is the response index paired with row ``i``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: design {X.shape}, response {y.shape}")
    if restarts < 1 or max_iters < 1:
        raise ValueError("restarts and max_iters must be positive")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficientError("design matrix is rank deficient")
    rng = np.random.default_rng(seed)
    order = np.argsort(y, kind="stable")
    best: Optional[HardEmResult] = None
    for r in range(restarts):
        perm = np.arange(y.size) if r == 0 else rng.permutation(y.size)
        trace = []
        for _ in range(max_iters):
            beta = np.linalg.lstsq(X, y[perm], rcond=None)[0]
            pred = X @ beta
            trace.append(float(np.sum((y[perm] - pred) ** 2)))
            new_perm = np.empty_like(perm)
            new_perm[np.argsort(pred, kind="stable")] = order
            if np.array_equal(new_perm, perm):
                break
            perm = new_perm
        if best is None or trace[-1] < best.objective:
            best = HardEmResult(beta, trace[-1], perm.copy(), trace)
    return best


def oracle_known_assignment(
    y1: ArrayLike,
    y2: ArrayLike,
    q_true: ArrayLike,
    K: int,
    kind: ModelKind | None = None,
    orders: Optional[tuple[int, int]] = None,
    nonnegative: bool = False,
    denoise: bool = True,
    cadzow_iters: int = 100,
) -> SssrResult:
    """
    Estimation with the true assignment: unshuffle, then per-channel spectral estimation.

    Each channel gets its own support estimate (orders ``K // 2`` and
    ``K - K // 2`` unless given); the union forms the sensing matrix and each
    channel's weights are fitted by (nonnegative) least squares against it.
    """
    y1, y2 = _check_inputs(y1, y2, K)
    kind = Dirac() if kind is None else kind
    K1, K2 = (K // 2, K - K // 2) if orders is None else (int(orders[0]), int(orders[1]))
    if K1 + K2 != K or min(K1, K2) < 1:
        raise ValueError(f"per-channel orders {orders!r} must be positive and sum to K={K}")
    q = TwoChannelMask(np.asarray(q_true)).q
    x1, x2 = apply_mask(q, y1, y2)
    t1 = estimate_support(x1, K1, kind, denoise=denoise, max_iters=cadzow_iters)
    t2 = estimate_support(x2, K2, kind, denoise=denoise, max_iters=cadzow_iters)
    sensing = build_sensing_matrix(np.sort(np.concatenate([t1, t2])), kind, y1.size)
    E = sensing.matrix
    if np.linalg.matrix_rank(E) < E.shape[1]:
        raise RankDeficientError("sensing matrix is rank deficient")
    solve = (lambda b: nnls(E, b)[0]) if nonnegative else (lambda b: np.linalg.lstsq(E, b, rcond=None)[0])
    beta = np.concatenate([solve(x1), solve(x2)])
    A = _block(E)
    mse = float(np.mean((np.concatenate([x1, x2]) - A @ beta) ** 2))
    return SssrResult(
        assignment=TwoChannelMask(q),
        coefficients=beta,
        sensing=sensing,
        mse_trace=[mse],
        best_iteration=0,
        reconstructed=_frame(A, beta, y1.size, kind),
        history=[(q.copy(), beta.copy())],
    )


def oracle_known_support(
    y1: ArrayLike,
    y2: ArrayLike,
    true_locations: Sequence[float],
    kind: ModelKind | None = None,
    max_iters: int = 20,
    nonnegative: bool = False,
    seed=None,
    **mm_options,
) -> SssrResult:
    """Shuffled recovery with the exact support, skipping the spectral step."""
    t = np.asarray(true_locations, dtype=float)
    return run(y1, y2, t.size, kind, max_iters=max_iters, nonnegative=nonnegative, locations=t, seed=seed, **mm_options)
