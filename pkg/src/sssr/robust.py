"""
MM-estimation of linear regression with Tukey's bisquare.

The S-stage draws elemental subsets (P rows solved exactly), scores each
candidate by its M-scale and refines the best ones with a few concentration
steps; the winning scale is then frozen and the MM-stage runs iteratively
reweighted least squares with the efficient bisquare constant. With
``nonnegative=True`` every weighted least-squares solve becomes a weighted
NNLS solve, so all iterates stay feasible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import nnls

from .exceptions import RankDeficientError

__all__ = [
    "C_S",
    "C_MM",
    "RobustFit",
    "bisquare_rho",
    "bisquare_weights",
    "m_scale",
    "mm_objective",
    "mm_fit",
]

C_S = 1.547  # 50% breakdown with b = 0.5
C_MM = 4.685  # 95% efficiency at the normal model


@dataclass
class RobustFit:
    coefficients: NDArray[np.float64]
    scale: float
    weights: NDArray[np.float64]
    iterations: int
    converged: bool
    objective_trace: list = field(default_factory=list)
    degenerate: bool = False


def bisquare_rho(u: ArrayLike, c: float) -> NDArray[np.float64]:
    """Tukey's bisquare loss, scaled so that it saturates at 1."""
    v = np.minimum((np.asarray(u, dtype=float) / c) ** 2, 1.0)
    return 1.0 - (1.0 - v) ** 3


def bisquare_weights(u: ArrayLike, c: float) -> NDArray[np.float64]:
    v = (np.asarray(u, dtype=float) / c) ** 2
    return np.where(v < 1.0, (1.0 - v) ** 2, 0.0)


def _m_scale_rows(R: NDArray, c: float, b: float, tol: float, max_iters: int) -> NDArray:
    """
    Row-wise M-scale; rows that collapse onto an exact fit get 0.

    ``g(s) = mean(rho(r / s)) - b`` is decreasing in ``s``, so each row keeps a
    bracket and takes Newton steps in ``log s``, bisecting whenever a step
    would leave the bracket.
    """
    A = np.abs(R)
    n = A.shape[1]
    frac_nonzero = np.count_nonzero(A, axis=1) / n
    s = np.zeros(A.shape[0])
    live = np.flatnonzero(frac_nonzero > b)
    if live.size == 0:
        return s
    Al = A[live]
    amax = Al.max(axis=1)
    amin = np.where(Al > 0, Al, np.inf).min(axis=1)
    # below amin / c every nonzero residual saturates, so g = frac_nonzero - b > 0;
    # rho(u) <= 3 (u / c)**2 puts the root below amax * sqrt(3 / b) / c
    lo = np.log(amin / c)
    hi = np.log(amax * np.sqrt(3.0 / b) / c) + 1e-6
    x = 0.5 * (lo + hi)
    active = np.ones(live.size, dtype=bool)
    for _ in range(max_iters):
        u = Al[active] / np.exp(x[active])[:, None]
        v = np.minimum((u / c) ** 2, 1.0)
        g = (1.0 - (1.0 - v) ** 3).mean(axis=1) - b
        # d g / d log s = -mean(u * rho'(u))
        dg = -(6.0 * v * (1.0 - v) ** 2).mean(axis=1)
        xa, la, ha = x[active], lo[active], hi[active]
        la = np.where(g > 0, xa, la)
        ha = np.where(g > 0, ha, xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dg < 0, -g / dg, np.nan)
        xn = xa + step
        done = (g == 0) | (np.abs(step) <= tol)
        out = ~done & (~np.isfinite(xn) | (xn <= la) | (xn >= ha))
        xn = np.where(done, np.where(g == 0, xa, xn), np.where(out, 0.5 * (la + ha), xn))
        idx = np.flatnonzero(active)
        x[idx], lo[idx], hi[idx] = xn, la, ha
        active[idx[done]] = False
        if not np.any(active):
            break
    s[live] = np.exp(x)
    return s


def m_scale(
    residuals: ArrayLike,
    c: float = C_S,
    b: float = 0.5,
    tol: float = 1e-9,
    max_iters: int = 1000,
) -> float:
    """
    M-estimate of scale: the ``s`` solving ``mean(rho_c(r / s)) = b``.

    Solved by safeguarded Newton steps on ``log s`` (``tol`` is therefore a
    relative tolerance on ``s``). When no more than a fraction ``b`` of the residuals is nonzero the
    equation has no positive root (exact fit) and 0.0 is returned; callers
    treat a zero scale as degenerate.
    """
    r = np.atleast_1d(np.asarray(residuals, dtype=float))
    if r.size == 0:
        raise ValueError("residuals must be non-empty")
    return float(_m_scale_rows(r[None, :], c, b, tol, max_iters)[0])


def mm_objective(residuals: ArrayLike, scale: float, c: float = C_MM) -> float:
    return float(bisquare_rho(np.asarray(residuals) / scale, c).sum())


def _weighted_solve(X, y, w, nonnegative):
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    yw = y * sw
    if nonnegative:
        return nnls(Xw, yw)[0]
    return np.linalg.lstsq(Xw, yw, rcond=None)[0]


def _elemental_candidates(X, y, n_starts, rng, nonnegative):
    N, P = X.shape
    found = []
    attempts = 0
    while len(found) < n_starts and attempts < 50:
        attempts += 1
        idx = np.array([rng.choice(N, size=P, replace=False) for _ in range(2 * n_starts)])
        sub = X[idx]
        sv = np.linalg.svd(sub, compute_uv=False)
        ok = sv[:, -1] > 1e-10 * sv[:, 0]
        if not np.any(ok):
            continue
        if nonnegative:
            for rows in idx[ok]:
                found.append(nnls(X[rows], y[rows])[0])
        else:
            found.extend(np.linalg.solve(sub[ok], y[idx[ok]][..., None])[..., 0])
    return found[:n_starts]


EXACT_RTOL = 1e-9


def _chop(r: NDArray, y: NDArray) -> NDArray:
    """
    Zero residuals below ``EXACT_RTOL * max|y|``.

    Elemental solves on ill-conditioned subsets leave errors well above
    machine precision on rows they fit exactly; without this floor such a
    fit would not be recognized as exact.
    """
    floor = EXACT_RTOL * np.max(np.abs(y), initial=0.0)
    return np.where(np.abs(r) <= floor, 0.0, r)


def _polish(X, y, beta, nonnegative):
    """Refit on the rows an exact fit matches, removing elemental round-off."""
    rows = _chop(y - X @ beta, y) == 0.0
    if np.linalg.matrix_rank(X[rows]) < X.shape[1]:
        return beta
    return _weighted_solve(X[rows], y[rows], np.ones(int(rows.sum())), nonnegative)


def _concentrate(X, y, beta, scale, nonnegative, c, b, steps):
    """A few S-stage IRWLS steps, re-estimating the scale each time."""
    for _ in range(steps):
        r = y - X @ beta
        w = bisquare_weights(r / scale, c)
        if np.count_nonzero(w) < X.shape[1]:
            break
        new = _weighted_solve(X, y, w, nonnegative)
        new_scale = m_scale(_chop(y - X @ new, y), c, b)
        if new_scale == 0.0:
            return new, 0.0
        if new_scale > scale:
            break
        done = scale - new_scale <= 1e-6 * scale
        beta, scale = new, new_scale
        if done:
            break
    return beta, scale


def mm_fit(
    design: ArrayLike,
    response: ArrayLike,
    nonnegative: bool = False,
    tol: float = 1e-8,
    max_iters: int = 200,
    n_starts: int = 20,
    seed=None,
    init: Optional[Sequence[ArrayLike]] = None,
    c_s: float = C_S,
    b: float = 0.5,
    c_mm: float = C_MM,
    n_refine: int = 3,
    refine_steps: int = 10,
) -> RobustFit:
    """
    Robust MM-estimate of ``response ~ design @ beta``.

    Parameters
    ----------
    design : array_like, shape (N, P)
        Full column rank, ``N > P``.
    response : array_like, shape (N,)
    nonnegative : bool
        Constrain the coefficients to be nonnegative.
    tol : float
        Relative change of the coefficients that stops the MM stage.
    max_iters : int
        Cap on MM-stage IRWLS iterations.
    n_starts : int
        Number of random elemental subsets for the S-stage.
    seed : int or numpy.random.Generator, optional
    init : sequence of array_like, optional
        Extra deterministic S-stage candidates (e.g. a previous solution).
    n_refine, refine_steps : int
        How many of the best candidates get concentration steps, and how many.

    Returns
    -------
    RobustFit
        ``converged`` is False when the MM stage hit ``max_iters``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError(f"shape mismatch: design {X.shape}, response {y.shape}")
    N, P = X.shape
    if N <= P:
        raise ValueError(f"need more rows than columns, got {X.shape}")
    if np.linalg.matrix_rank(X) < P:
        raise RankDeficientError("design matrix is rank deficient")
    rng = np.random.default_rng(seed)

    # S-stage
    cands = []
    if nonnegative:
        cands.append(nnls(X, y)[0])
    else:
        cands.append(np.linalg.lstsq(X, y, rcond=None)[0])
    for beta0 in init or ():
        beta0 = np.asarray(beta0, dtype=float)
        if beta0.shape == (P,) and np.all(np.isfinite(beta0)):
            cands.append(np.maximum(beta0, 0.0) if nonnegative else beta0)
    cands.extend(_elemental_candidates(X, y, n_starts, rng, nonnegative))
    B = np.array(cands)
    R = _chop(y[None, :] - B @ X.T, y)
    scales = _m_scale_rows(R, c_s, b, 1e-9, 1000)

    if np.any(scales == 0.0):
        # exact fit of at least half the rows; prefer the one fitting the most
        exact = np.flatnonzero(scales == 0.0)
        beta = B[exact[np.argmax(np.sum(R[exact] == 0.0, axis=1))]]
        beta = _polish(X, y, beta, nonnegative)
        r = _chop(y - X @ beta, y)
        w = (r == 0).astype(float)
        return RobustFit(beta, 0.0, w, 0, True, [], degenerate=True)

    best_beta, best_scale = None, np.inf
    for i in np.argsort(scales)[:n_refine]:
        beta, scale = _concentrate(X, y, B[i], scales[i], nonnegative, c_s, b, refine_steps)
        if scale < best_scale:
            best_beta, best_scale = beta, scale
    beta, scale = best_beta, best_scale
    if scale == 0.0:
        beta = _polish(X, y, beta, nonnegative)
        r = _chop(y - X @ beta, y)
        return RobustFit(beta, 0.0, (r == 0).astype(float), 0, True, [], degenerate=True)

    # MM-stage at fixed scale
    r = y - X @ beta
    obj = mm_objective(r, scale, c_mm)
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        w = bisquare_weights(r / scale, c_mm)
        if np.count_nonzero(w) < P:
            break
        new = _weighted_solve(X, y, w, nonnegative)
        r_new = y - X @ new
        obj_new = mm_objective(r_new, scale, c_mm)
        if obj_new > obj * (1 + 1e-12) + 1e-300:
            # rounding-level increase: keep the previous iterate
            converged = True
            break
        step = np.linalg.norm(new - beta)
        beta, r, obj = new, r_new, obj_new
        trace.append(obj)
        if step <= tol * max(np.linalg.norm(beta), np.finfo(float).tiny):
            converged = True
            break
    weights = bisquare_weights(r / scale, c_mm)
    return RobustFit(beta, float(scale), weights, it, converged, trace)
