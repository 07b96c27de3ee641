"""
Support estimation from uniform spectral samples.

Coefficient sequences are indexed by symmetric frequency, i.e. a length-L
array holds bins ``-(L-1)/2 .. (L-1)/2``. A mixture of K exponentials
``c_l = sum_k a_k u_k**l`` makes the (L-K) x (K+1) Toeplitz matrix
``T[i, j] = c[i + K - j]`` exactly rank K; its null vector is the
annihilating filter whose roots are the ``u_k = exp(-j 2 pi t_k)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import svd, toeplitz
from scipy.optimize import least_squares, nnls

from .exceptions import ConvergenceWarning, RankDeficientError, SingularModelError
from .signal_model import (
    DecayingExponential,
    Dirac,
    ModelKind,
    build_sensing_matrix,
)

__all__ = [
    "SpectrumEstimate",
    "sample_spectrum",
    "toeplitz_embed",
    "rank_ratio",
    "cadzow_denoise",
    "prony",
    "amplitude_lsq",
    "decay_compensate",
    "decay_attenuate",
    "estimate_alpha",
    "polish_locations",
    "estimate_support",
]


@dataclass(frozen=True)
class SpectrumEstimate:
    coefficients: NDArray[np.complex128]
    K: int

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.ndim != 1 or c.size % 2 == 0:
            raise ValueError("coefficients must be a 1-D array of odd length")
        object.__setattr__(self, "coefficients", c)

    @property
    def bins(self) -> NDArray[np.int64]:
        h = (self.coefficients.size - 1) // 2
        return np.arange(-h, h + 1)

    def is_conjugate_symmetric(self, atol: float = 1e-9) -> bool:
        c = self.coefficients
        return bool(np.allclose(c, np.conj(c[::-1]), atol=atol, rtol=0))


def sample_spectrum(samples: ArrayLike, K: int) -> SpectrumEstimate:
    """DFT of real samples, reordered to symmetric bins."""
    x = np.asarray(samples, dtype=float)
    if x.size % 2 == 0:
        raise ValueError(f"need an odd number of samples, got {x.size}")
    return SpectrumEstimate(np.fft.fftshift(np.fft.fft(x)), K)


def toeplitz_embed(coeffs: ArrayLike, K: int, ncols: int | None = None) -> NDArray[np.complex128]:
    """
    Toeplitz matrix ``T[i, j] = coeffs[i + ncols - 1 - j]``.

    The default ``ncols = K + 1`` gives the minimal (L-K) x (K+1)
    annihilating-filter arrangement.
    """
    c = np.asarray(coeffs, dtype=complex)
    if K < 1:
        raise ValueError("model order K must be at least 1")
    ncols = K + 1 if ncols is None else int(ncols)
    if ncols < K + 1:
        raise ValueError("need at least K+1 columns")
    if c.size < K + ncols:
        raise ValueError(f"need at least {K + ncols} coefficients for order K={K}, got {c.size}")
    return toeplitz(c[ncols - 1:], c[ncols - 1::-1])


def rank_ratio(coeffs: ArrayLike, K: int, ncols: int | None = None) -> float:
    """``sigma_{K+1} / sigma_1`` of the Toeplitz embedding (0 for an all-zero input)."""
    s = svd(toeplitz_embed(coeffs, K, ncols), compute_uv=False)
    if s[0] == 0:
        return 0.0
    return float(s[K] / s[0])


def _diagonal_average(A: NDArray[np.complex128], ncols: int) -> NDArray[np.complex128]:
    # T[i, j] = c[i + ncols - 1 - j], so entry (i, j) belongs to coefficient i + ncols - 1 - j
    rows = A.shape[0]
    idx = (np.arange(rows)[:, None] + (ncols - 1) - np.arange(ncols)[None, :]).ravel()
    L = rows + ncols - 1
    counts = np.bincount(idx, minlength=L)
    flat = A.ravel()
    re = np.bincount(idx, weights=flat.real, minlength=L)
    im = np.bincount(idx, weights=flat.imag, minlength=L)
    return (re + 1j * im) / counts


def cadzow_denoise(
    coeffs: ArrayLike,
    K: int,
    max_iters: int = 100,
    tol: float = 1e-9,
    ncols: int | None = None,
) -> NDArray[np.complex128]:
    """
    Rank-K Toeplitz denoising by alternating projections.

    Each sweep truncates the SVD of the Toeplitz embedding to rank K, averages
    the diagonals back into a sequence and re-imposes conjugate symmetry.
    Iteration stops when the relative change of the sequence falls below
    ``tol``; hitting ``max_iters`` emits a :class:`ConvergenceWarning` and the
    last iterate is returned.

    Parameters
    ----------
    coeffs : array_like, shape (L,)
        Symmetric-bin coefficients, ``L >= 2K + 1`` and odd.
    K : int
        Target rank.
    max_iters : int
        Sweep cap.
    tol : float
        Relative Frobenius change that counts as converged.
    ncols : int, optional
        Columns of the embedding; defaults to the square ``(L + 1) // 2``,
        which averages the noise over many more diagonals than the minimal
        ``K + 1`` columns.

    Returns
    -------
    ndarray, shape (L,)
        Denoised coefficients.
    """
    c0 = np.asarray(coeffs, dtype=complex)
    ncols = (c0.size + 1) // 2 if ncols is None else int(ncols)
    if c0.size < 2 * K + 1:
        raise ValueError(f"need at least {2 * K + 1} coefficients for order K={K}")
    toeplitz_embed(c0, K, ncols)
    if not np.any(c0):
        return c0.copy()
    c = c0.copy()
    start_ratio = rank_ratio(c0, K, ncols)
    converged = False
    for _ in range(max_iters):
        U, s, Vh = svd(toeplitz_embed(c, K, ncols), full_matrices=False)
        low = (U[:, :K] * s[:K]) @ Vh[:K]
        new = _diagonal_average(low, ncols)
        new = 0.5 * (new + np.conj(new[::-1]))
        change = np.linalg.norm(new - c) / max(np.linalg.norm(c), np.finfo(float).tiny)
        c = new
        if change < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"Cadzow denoising stopped after {max_iters} iterations without converging",
            ConvergenceWarning,
            stacklevel=2,
        )
    # alternating projections can stall above the starting point on pathological inputs
    if rank_ratio(c, K, ncols) > start_ratio:
        return c0.copy()
    return c


def prony(coeffs: ArrayLike, K: int, ncols: int | None = None) -> NDArray[np.float64]:
    """
    Locations of a K-term exponential mixture by the annihilating filter.

    The filter is the right singular vector of the Toeplitz embedding for the
    smallest singular value; its roots ``u_k`` give ``t_k = -arg(u_k)/(2 pi) mod 1``.
    Root magnitudes are ignored. Returns the K locations sorted ascending.

    Raises
    ------
    SingularModelError
        If the filter's leading coefficient vanishes (fewer than K finite roots).
    """
    if K < 1:
        raise ValueError("model order K must be at least 1")
    T = toeplitz_embed(coeffs, K, ncols)
    _, _, Vh = svd(T)
    h = np.conj(Vh[-1])
    h = h / np.linalg.norm(h)
    # the filter of a wider embedding has degree ncols-1; keep the K roots nearest the circle
    if h.size == K + 1 and abs(h[0]) < 1e-12:
        raise SingularModelError("annihilating filter has a vanishing leading coefficient")
    roots = np.roots(h)
    if roots.size < K:
        raise SingularModelError(f"annihilating filter has only {roots.size} finite roots")
    if roots.size > K:
        roots = roots[np.argsort(np.abs(np.abs(roots) - 1.0))[:K]]
    t = np.mod(-np.angle(roots) / (2 * np.pi), 1.0)
    t[t >= 1.0 - 1e-12] = 0.0
    return np.sort(t)


def amplitude_lsq(
    samples: ArrayLike,
    locations: ArrayLike,
    kind: ModelKind,
    nonnegative: bool = False,
) -> NDArray[np.float64]:
    """Least-squares (or nonnegative least-squares) spike weights for a known support."""
    y = np.asarray(samples, dtype=float)
    E = build_sensing_matrix(locations, kind, y.size).matrix
    if np.linalg.matrix_rank(E) < E.shape[1]:
        raise RankDeficientError("sensing matrix is rank deficient")
    if nonnegative:
        return nnls(E, y)[0]
    return np.linalg.lstsq(E, y, rcond=None)[0]


def _bins_for(coeffs: NDArray) -> NDArray[np.int64]:
    h = (coeffs.size - 1) // 2
    return np.arange(-h, h + 1)


def decay_compensate(spectrum, alpha: float):
    """
    Undo the exponential kernel: multiply bin ``l`` by ``alpha + j 2 pi l``.

    Accepts a :class:`SpectrumEstimate` (returns one) or a raw symmetric-bin array.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    c = spectrum.coefficients if isinstance(spectrum, SpectrumEstimate) else np.asarray(spectrum, dtype=complex)
    out = c * (alpha + 2j * np.pi * _bins_for(c))
    if isinstance(spectrum, SpectrumEstimate):
        return SpectrumEstimate(out, spectrum.K)
    return out


def decay_attenuate(spectrum, alpha: float):
    """Inverse of :func:`decay_compensate`."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    c = spectrum.coefficients if isinstance(spectrum, SpectrumEstimate) else np.asarray(spectrum, dtype=complex)
    out = c / (alpha + 2j * np.pi * _bins_for(c))
    if isinstance(spectrum, SpectrumEstimate):
        return SpectrumEstimate(out, spectrum.K)
    return out


def _alpha_objective(coeffs: NDArray, K: int, alpha: float, ncols: int | None) -> float:
    return rank_ratio(decay_compensate(coeffs, alpha), K, ncols)


def estimate_alpha(
    samples: ArrayLike,
    K: int,
    alpha_range: tuple[float, float] = (1.0, 50.0),
    rtol: float = 1e-4,
    ncols: int | None = None,
) -> float:
    """
    Decay rate of a stream of decaying exponentials by golden-section search.

    Minimizes ``sigma_{K+1}/sigma_1`` of the Toeplitz embedding of the
    compensated spectrum over ``alpha_range`` until the bracket is narrower
    than ``rtol * lo``.
    """
    lo, hi = (float(v) for v in alpha_range)
    if not (0 < lo < hi) or not (np.isfinite(lo) and np.isfinite(hi)):
        raise ValueError(f"invalid alpha range {alpha_range!r}")
    c = sample_spectrum(samples, K).coefficients
    f = lambda a: _alpha_objective(c, K, a, ncols)  # noqa: E731
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) >= rtol * lo:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def _projection_residual(samples: NDArray, t: NDArray, kind: ModelKind) -> NDArray:
    A = build_sensing_matrix(np.mod(t, 1.0), kind, samples.size).matrix
    return samples - A @ np.linalg.lstsq(A, samples, rcond=None)[0]


def polish_locations(samples: ArrayLike, locations: ArrayLike, kind: ModelKind | None = None) -> NDArray[np.float64]:
    """
    Least-squares refinement of spike locations by variable projection.

    Minimizes ``||y - A(t) A(t)^+ y||`` over the locations ``t`` with the
    weights eliminated, starting from ``locations``. The start is returned
    unchanged if the local search does not lower the residual.

    Parameters
    ----------
    samples : array_like, shape (N,)
        Real time-domain samples; N odd.
    locations : array_like, shape (K,)
        Starting locations in [0, 1).
    kind : ModelKind, optional
        Atom model, Diracs by default.

    Returns
    -------
    ndarray, shape (K,)
        Locations in [0, 1), sorted ascending.
    """
    kind = Dirac() if kind is None else kind
    y = np.asarray(samples, dtype=float)
    t0 = np.sort(np.mod(np.asarray(locations, dtype=float), 1.0))
    start = np.sum(_projection_residual(y, t0, kind) ** 2)
    if start == 0.0:
        return t0
    fit = least_squares(lambda t: _projection_residual(y, t, kind), t0, x_scale=1.0 / y.size)
    if not np.all(np.isfinite(fit.x)) or 2.0 * fit.cost >= start:
        return t0
    return np.sort(np.mod(fit.x, 1.0))


def estimate_support(
    samples: ArrayLike,
    K: int,
    kind: ModelKind | None = None,
    denoise: bool = True,
    max_iters: int = 100,
    tol: float = 1e-9,
    ncols: int | None = None,
    polish: bool = True,
) -> NDArray[np.float64]:
    """
    DFT, optional decay compensation, Cadzow denoising and Prony on real samples.

    ``ncols`` sets the width of the Toeplitz embedding used by both Cadzow
    and Prony; it defaults to the square ``(L + 1) // 2``. With ``polish``
    the Prony locations seed :func:`polish_locations` on the samples, which
    brings them to the least-squares optimum, which Prony alone misses in
    noise.

    Returns the K estimated locations sorted ascending.
    """
    kind = Dirac() if kind is None else kind
    c = sample_spectrum(samples, K).coefficients
    ncols = (c.size + 1) // 2 if ncols is None else int(ncols)
    if isinstance(kind, DecayingExponential):
        c = decay_compensate(c, kind.alpha)
    if denoise:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            c = cadzow_denoise(c, K, max_iters=max_iters, tol=tol, ncols=ncols)
    t = prony(c, K, ncols)
    return polish_locations(samples, t, kind) if polish else t
