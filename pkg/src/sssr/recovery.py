"""
Two-channel shuffled sparse signal recovery.

Step 1 estimates the joint support from the channel sum, which a
cross-channel shuffle leaves untouched. Step 2 alternates a robust fit of the
block model ``[E 0; 0 E] beta`` to the currently unshuffled samples with a
per-sample reassignment, and keeps the iterate with the smallest error.

The magnitude of the channel difference is also untouched by the shuffle, so
a second starting mask comes from fitting ``|E gamma|`` to ``|y1 - y2|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import nnls

from .exceptions import RankDeficientError, SingularModelError
from .robust import C_S, _chop, _elemental_candidates, _m_scale_rows, mm_fit
from .shuffle import TwoChannelMask, apply_mask
from .signal_model import (
    Dirac,
    ModelKind,
    MultiChannelFrame,
    SensingModel,
    build_sensing_matrix,
)
from .spectral import estimate_support

__all__ = [
    "SssrResult",
    "solve_q_relaxed",
    "project_binary",
    "assignment_objective",
    "run",
    "refine",
    "fit_assignment",
]


@dataclass
class SssrResult:
    """
    Output of :func:`run`.

    ``coefficients`` stacks the two channel blocks, so channel ``m`` is
    ``sensing.matrix @ coefficients[m*K:(m+1)*K]``. The trace holds the error
    of every iterate; ``best_iteration`` points at its minimum, which is the
    iterate returned.
    """

    assignment: TwoChannelMask
    coefficients: NDArray[np.float64]
    sensing: SensingModel
    mse_trace: list
    best_iteration: int
    reconstructed: MultiChannelFrame
    history: list = field(default_factory=list, repr=False)

    @property
    def mse(self) -> float:
        return float(self.mse_trace[self.best_iteration])

    @property
    def locations(self) -> NDArray[np.float64]:
        return self.sensing.locations

    @property
    def iterations(self) -> int:
        return len(self.mse_trace)


def solve_q_relaxed(y1: ArrayLike, y2: ArrayLike, xhat1: ArrayLike, xhat2: ArrayLike) -> NDArray[np.float64]:
    """
    Per-sample minimizer over ``q in [0, 1]`` of the relaxed assignment problem.

    With ``d = xhat1 - xhat2`` each sample contributes
    ``(y1 - xhat2 - q d)**2 + (y2 - xhat1 + q d)**2``, a scalar quadratic in
    ``q`` minimized at ``(y1 - y2 + d) / (2 d)``, then clamped. Samples where
    the two model channels agree (``|d| < 1e-12``) keep ``q = 1``.
    """
    y1, y2, a, b = (np.asarray(v, dtype=float) for v in (y1, y2, xhat1, xhat2))
    if not (y1.shape == y2.shape == a.shape == b.shape) or y1.ndim != 1:
        raise ValueError("all inputs must be 1-D of the same length")
    d = a - b
    q = np.ones_like(d)
    nz = np.abs(d) >= 1e-12
    q[nz] = (y1[nz] - y2[nz] + d[nz]) / (2.0 * d[nz])
    return np.clip(q, 0.0, 1.0)


def project_binary(q: ArrayLike) -> TwoChannelMask:
    """Round a relaxed assignment to {0, 1}; exactly 0.5 rounds up."""
    q = np.asarray(q, dtype=float)
    if np.any(~np.isfinite(q)) or np.any(q < 0.0) or np.any(q > 1.0):
        raise ValueError("relaxed assignment entries must lie in [0, 1]")
    return TwoChannelMask((q >= 0.5).astype(np.uint8))


def assignment_objective(q: ArrayLike, y1, y2, xhat1, xhat2) -> float:
    """``||y - Pi_q xhat||^2`` summed over both channels; ``q`` may be relaxed."""
    q = np.asarray(q, dtype=float)
    xhat1 = np.asarray(xhat1, dtype=float)
    xhat2 = np.asarray(xhat2, dtype=float)
    m1 = q * xhat1 + (1 - q) * xhat2
    m2 = q * xhat2 + (1 - q) * xhat1
    return float(np.sum((np.asarray(y1) - m1) ** 2) + np.sum((np.asarray(y2) - m2) ** 2))


def _block(E: NDArray) -> NDArray:
    N, K = E.shape
    A = np.zeros((2 * N, 2 * K))
    A[:N, :K] = E
    A[N:, K:] = E
    return A


def _frame(A: NDArray, beta: NDArray, N: int, kind: ModelKind) -> MultiChannelFrame:
    x = A @ beta
    return MultiChannelFrame(channels=np.vstack([x[:N], x[N:]]), model=kind)


def _block_start(E: NDArray, u1: NDArray, u2: NDArray, n_starts: int, rng, nonnegative: bool) -> NDArray:
    """
    Start for the block fit assembled from per-channel elemental fits.

    Each channel block only sees its own samples, so a clean start needs K
    clean rows of one channel rather than 2K clean rows overall. Per block
    the candidate with the smallest M-scale wins.
    """
    parts = []
    for u in (u1, u2):
        cands = _elemental_candidates(E, u, n_starts, rng, nonnegative)
        cands.append(nnls(E, u)[0] if nonnegative else np.linalg.lstsq(E, u, rcond=None)[0])
        B = np.array(cands)
        scales = _m_scale_rows(_chop(u[None, :] - B @ E.T, u), C_S, 0.5, 1e-9, 1000)
        parts.append(B[int(np.argmin(scales))])
    return np.concatenate(parts)


def _sign_start(y1: NDArray, y2: NDArray, E: NDArray, rng, n_starts: int = 50, max_iters: int = 30) -> NDArray:
    """
    Mask from the signs of a fitted channel difference.

    ``|y1 - y2| = |x1 - x2|`` for every mask, and ``x1 - x2 = E gamma``. Random
    starts of the alternation ``s = sign(E gamma)``, ``gamma = E^+ (s |d|)``
    run in parallel; the best fit of ``|d|`` fixes which samples agree in
    sign with the model difference. Only the noise enters this fit, whatever
    fraction of samples was swapped.
    """
    d = y1 - y2
    m = np.abs(d)
    P = np.linalg.pinv(E)
    G = rng.standard_normal((E.shape[1], n_starts))
    for _ in range(max_iters):
        S = np.where(E @ G >= 0, 1.0, -1.0)
        G_new = P @ (S * m[:, None])
        if np.allclose(G_new, G, rtol=1e-12, atol=0.0):
            break
        G = G_new
    cost = np.sum((np.abs(E @ G) - m[:, None]) ** 2, axis=0)
    g = G[:, int(np.argmin(cost))]
    q = ((d >= 0) == (E @ g >= 0)).astype(np.uint8)
    # q and 1 - q differ by a channel relabelling; keep most observed labels
    return q if 2 * int(q.sum()) >= q.size else 1 - q


def _step2(y1, y2, sensing: SensingModel, max_iters, nonnegative, rng, q_init, mm_options):
    N = y1.size
    A = _block(sensing.matrix)
    q = np.ones(N, dtype=np.uint8) if q_init is None else np.asarray(q_init, dtype=np.uint8).copy()
    history = []
    trace = []
    beta_prev = None
    n_starts = mm_options.get("n_starts", 20)
    for _ in range(max_iters):
        u1, u2 = apply_mask(q, y1, y2)
        starts = [_block_start(sensing.matrix, u1, u2, n_starts, rng, nonnegative)]
        if beta_prev is not None:
            starts.append(beta_prev)
        fit = mm_fit(
            A,
            np.concatenate([u1, u2]),
            nonnegative=nonnegative,
            seed=rng,
            init=starts,
            **mm_options,
        )
        beta = fit.coefficients
        xhat = A @ beta
        q = project_binary(solve_q_relaxed(y1, y2, xhat[:N], xhat[N:])).q
        u1, u2 = apply_mask(q, y1, y2)
        mse = float(np.mean((np.concatenate([u1, u2]) - xhat) ** 2))
        trace.append(mse)
        history.append((q.copy(), beta.copy()))
        beta_prev = beta
    best = int(np.argmin(trace))
    q_best, beta_best = history[best]
    return SssrResult(
        assignment=TwoChannelMask(q_best),
        coefficients=beta_best,
        sensing=sensing,
        mse_trace=trace,
        best_iteration=best,
        reconstructed=_frame(A, beta_best, N, sensing.kind),
        history=history,
    )


def _canonical_swap(y1: NDArray, y2: NDArray) -> bool:
    """Fixed channel order so that swapping the inputs only relabels the result."""
    diff = y1 - y2
    nz = np.flatnonzero(diff)
    return bool(nz.size and diff[nz[0]] < 0)


def _swap_result(res: SssrResult) -> SssrResult:
    K = res.sensing.K
    beta = np.concatenate([res.coefficients[K:], res.coefficients[:K]])
    history = [(q, np.concatenate([b[K:], b[:K]])) for q, b in res.history]
    frame = res.reconstructed
    return SssrResult(
        assignment=res.assignment,
        coefficients=beta,
        sensing=res.sensing,
        mse_trace=list(res.mse_trace),
        best_iteration=res.best_iteration,
        reconstructed=MultiChannelFrame(frame.channels[::-1].copy(), model=frame.model),
        history=history,
    )


def _check_inputs(y1, y2, K):
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    if y1.ndim != 1 or y1.shape != y2.shape:
        raise ValueError(f"channels must be 1-D of equal length, got {y1.shape} and {y2.shape}")
    if K < 1:
        raise ValueError("model order K must be at least 1")
    if y1.size < 2 * K:
        raise ValueError(f"N={y1.size} is too small for K={K} (need N >= 2K)")
    return y1, y2


def fit_assignment(
    y1: ArrayLike,
    y2: ArrayLike,
    sensing: SensingModel,
    max_iters: int = 20,
    nonnegative: bool = False,
    q_init: Optional[ArrayLike] = None,
    seed=None,
    sign_start: bool = True,
    **mm_options,
) -> SssrResult:
    """
    The alternating robust-fit / reassignment loop for a fixed sensing matrix.

    Starts from ``q_init``, or without one from the all-ones mask and, with
    ``sign_start``, a second time from the mask of :func:`_sign_start`. Every
    iterate is scored by the mean squared error between the unshuffled
    samples and the model, and the best one over all runs is returned.
    """
    y1, y2 = _check_inputs(y1, y2, sensing.K)
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    rng = np.random.default_rng(seed)
    if q_init is not None:
        return _step2(y1, y2, sensing, max_iters, nonnegative, rng, q_init, mm_options)
    swap = _canonical_swap(y1, y2)
    if swap:
        y1, y2 = y2, y1
    res = _step2(y1, y2, sensing, max_iters, nonnegative, rng, None, mm_options)
    if sign_start:
        q0 = _sign_start(y1, y2, sensing.matrix, rng)
        alt = _step2(y1, y2, sensing, max_iters, nonnegative, rng, q0, mm_options)
        if min(alt.mse_trace) < min(res.mse_trace):
            res = alt
    return _swap_result(res) if swap else res


def run(
    y1: ArrayLike,
    y2: ArrayLike,
    K: int,
    kind: ModelKind | None = None,
    max_iters: int = 20,
    nonnegative: bool = False,
    locations: Optional[Sequence[float]] = None,
    seed=None,
    denoise: bool = True,
    cadzow_iters: int = 100,
    sign_start: bool = True,
    **mm_options,
) -> SssrResult:
    """
    Recover two shuffled sparse channels.

    Parameters
    ----------
    y1, y2 : array_like, shape (N,)
        Observed (shuffled) channels; N odd.
    K : int
        Total number of spikes over both channels.
    kind : ModelKind, optional
        Atom model, Diracs by default.
    max_iters : int
        Number of Step 2 iterations; every iterate is scored.
    nonnegative : bool
        Constrain the spike weights to be nonnegative.
    locations : sequence of float, optional
        Known support; skips the spectral step when given.
    seed : int or numpy.random.Generator, optional
        Drives the random starts of the robust fit.
    denoise : bool
        Apply Cadzow denoising before Prony.
    cadzow_iters : int
        Sweep cap for the denoiser.
    sign_start : bool
        Also run the loop from the mask fitted to ``|y1 - y2|`` and keep the
        better run. Without it the loop starts from the observed labels only.
    **mm_options
        Forwarded to :func:`sssr.robust.mm_fit` (e.g. ``n_starts``, ``tol``).

    Returns
    -------
    SssrResult
    """
    y1, y2 = _check_inputs(y1, y2, K)
    kind = Dirac() if kind is None else kind
    if locations is None:
        locations = estimate_support(y1 + y2, K, kind, denoise=denoise, max_iters=cadzow_iters)
    sensing = build_sensing_matrix(locations, kind, y1.size)
    return fit_assignment(y1, y2, sensing, max_iters, nonnegative, seed=seed, sign_start=sign_start, **mm_options)


def refine(
    result: SssrResult,
    y1: ArrayLike,
    y2: ArrayLike,
    K: int,
    kind: ModelKind | None = None,
    orders: Optional[tuple[int, int]] = None,
    max_iters: int = 20,
    nonnegative: bool = False,
    seed=None,
    denoise: bool = True,
    cadzow_iters: int = 100,
    **mm_options,
) -> SssrResult:
    """
    Second pass with the support re-estimated from the individual channels.

    The samples are reassigned with the first-pass mask, each channel gets its
    own spectral estimate (orders ``K // 2`` and ``K - K // 2`` unless given),
    the union of both supports defines a new sensing matrix, and the Step 2
    loop restarts from the first-pass mask. Whichever of the two results has
    the smaller error is returned; if the per-channel estimate breaks down the
    input is returned unchanged.
    """
    y1, y2 = _check_inputs(y1, y2, K)
    kind = Dirac() if kind is None else kind
    K1, K2 = (K // 2, K - K // 2) if orders is None else (int(orders[0]), int(orders[1]))
    if K1 + K2 != K or min(K1, K2) < 1:
        raise ValueError(f"per-channel orders {orders!r} must be positive and sum to K={K}")
    u1, u2 = apply_mask(result.assignment.q, y1, y2)
    try:
        t1 = estimate_support(u1, K1, kind, denoise=denoise, max_iters=cadzow_iters)
        t2 = estimate_support(u2, K2, kind, denoise=denoise, max_iters=cadzow_iters)
        sensing = build_sensing_matrix(np.sort(np.concatenate([t1, t2])), kind, y1.size)
        new = fit_assignment(
            y1, y2, sensing, max_iters, nonnegative, q_init=result.assignment.q, seed=seed, **mm_options
        )
    except (ValueError, SingularModelError, RankDeficientError, np.linalg.LinAlgError):
        return result
    return new if new.mse < result.mse else result
