"""
Periodic sparse signal models.

Signals live on a canonical period [0, 1) and are sampled at ``N`` uniform
points. A stream of Diracs ``x(t) = sum_k a_k delta(t - t_k)`` has Fourier
series coefficients ``X_l = sum_k a_k exp(-j 2 pi t_k l)``. Under an ideal
low-pass sampling kernel the N samples are the inverse DFT of the
coefficients at the symmetric bins ``l in {-(N-1)/2, ..., (N-1)/2}``, which
for a single spike is the Dirichlet kernel ``sin(N pi t) / (N sin(pi t))``.

The decaying-exponential model convolves the stream with ``exp(-alpha t) u(t)``
(periodized), which divides every coefficient by ``alpha + j 2 pi l``.

Only odd ``N`` is supported so that the conjugate-symmetric spectrum of a real
signal maps onto the DFT bins without a Nyquist bin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = [
    "DiracStream",
    "Dirac",
    "DecayingExponential",
    "ModelKind",
    "SamplingConfig",
    "MultiChannelFrame",
    "SensingModel",
    "symmetric_bins",
    "kernel_response",
    "fs_coefficients",
    "spectrum",
    "synthesize",
    "build_sensing_matrix",
    "alpha_from_halflife",
    "add_noise",
]


@dataclass(frozen=True)
class DiracStream:
    """Spikes at ``locations`` in [0, 1) with real amplitudes ``weights``."""

    locations: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.locations, dtype=float))
        a = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if t.ndim != 1 or a.ndim != 1 or t.size != a.size:
            raise ValueError("locations and weights must be 1-D of equal length")
        if t.size < 1:
            raise ValueError("a stream needs at least one spike")
        if np.any(t < 0.0) or np.any(t >= 1.0):
            raise ValueError("locations must lie in [0, 1)")
        if np.unique(t).size != t.size:
            raise ValueError("locations must be pairwise distinct")
        object.__setattr__(self, "locations", t)
        object.__setattr__(self, "weights", a)

    @property
    def K(self) -> int:
        return self.locations.size


@dataclass(frozen=True)
class Dirac:
    """Ideal low-pass filtered stream of Diracs."""


@dataclass(frozen=True)
class DecayingExponential:
    """Stream of Diracs convolved with a periodized ``exp(-alpha t) u(t)``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")


ModelKind = Union[Dirac, DecayingExponential]


@dataclass(frozen=True)
class SamplingConfig:
    N: int = 121
    fs: float = 30.0
    tau_half: float = 0.25
    snr_db: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if not self.fs > 0 or not self.tau_half > 0:
            raise ValueError("fs and tau_half must be positive")

    @property
    def alpha(self) -> float:
        return alpha_from_halflife(self.tau_half, self.fs, self.N)


@dataclass(frozen=True)
class MultiChannelFrame:
    """M real channels of N samples each, with optional ground truth."""

    channels: NDArray[np.float64]
    model: ModelKind = field(default_factory=Dirac)
    truth: Optional[tuple] = None

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=float)
        if ch.ndim != 2:
            raise ValueError("channels must be a 2-D array of shape (M, N)")
        if ch.shape[0] < 2:
            raise ValueError("a multi-channel frame needs M >= 2")
        object.__setattr__(self, "channels", ch)
        if self.truth is not None:
            truth = tuple(self.truth)
            if len(truth) != ch.shape[0]:
                raise ValueError("truth must hold one DiracStream per channel")
            object.__setattr__(self, "truth", truth)

    @property
    def M(self) -> int:
        return self.channels.shape[0]

    @property
    def N(self) -> int:
        return self.channels.shape[1]


@dataclass(frozen=True)
class SensingModel:
    """Sampled atoms for a fixed support; ``matrix`` is N x K and real."""

    locations: NDArray[np.float64]
    kind: ModelKind
    matrix: NDArray[np.float64]

    @property
    def K(self) -> int:
        return self.locations.size

    @property
    def N(self) -> int:
        return self.matrix.shape[0]


def symmetric_bins(N: int) -> NDArray[np.int64]:
    """Frequencies ``-(N-1)/2 .. (N-1)/2`` in the order produced by ``fftshift``."""
    _check_odd(N)
    h = (N - 1) // 2
    return np.arange(-h, h + 1)


def kernel_response(kind: ModelKind, ell: ArrayLike) -> NDArray[np.complex128]:
    """Per-bin gain of the shaping kernel: 1 for Diracs, ``1/(alpha + j2pi l)`` otherwise."""
    ell = np.asarray(ell, dtype=float)
    if isinstance(kind, Dirac):
        return np.ones(ell.shape, dtype=complex)
    if isinstance(kind, DecayingExponential):
        return 1.0 / (kind.alpha + 2j * np.pi * ell)
    raise TypeError(f"unknown model kind {kind!r}")


def fs_coefficients(stream: DiracStream, ell):
    """Fourier series coefficient(s) of a Dirac stream at integer index ``ell``."""
    ell_arr = np.asarray(ell, dtype=float)
    phase = np.exp(-2j * np.pi * np.multiply.outer(ell_arr, stream.locations))
    out = phase @ stream.weights
    return complex(out) if out.ndim == 0 else out


def spectrum(stream: DiracStream, kind: ModelKind, N: int) -> NDArray[np.complex128]:
    """Coefficients of the shaped stream at the symmetric bins of an N-point DFT."""
    ell = symmetric_bins(N)
    return fs_coefficients(stream, ell) * kernel_response(kind, ell)


def synthesize(stream: DiracStream, kind: ModelKind, N: int) -> NDArray[np.float64]:
    """
    N real samples of the low-pass filtered (and optionally shaped) stream.

    Raises
    ------
    ValueError
        If ``N`` is even or ``N < 2K``.
    """
    _check_odd(N)
    if N < 2 * stream.K:
        raise ValueError(f"N={N} is too small for K={stream.K} spikes (need N >= 2K)")
    X = spectrum(stream, kind, N)
    x = np.fft.ifft(np.fft.ifftshift(X))
    return x.real.copy()


def build_sensing_matrix(locations: ArrayLike, kind: ModelKind, N: int) -> SensingModel:
    """
    Real N x K matrix whose k-th column samples a unit spike at ``locations[k]``.

    For Diracs the columns are shifted Dirichlet kernels; for decaying
    exponentials they are low-pass projected periodized exponentials.
    """
    _check_odd(N)
    t = np.atleast_1d(np.asarray(locations, dtype=float))
    if t.ndim != 1 or t.size < 1:
        raise ValueError("need a non-empty 1-D sequence of locations")
    if N < t.size:
        raise ValueError(f"N={N} is smaller than the number of atoms {t.size}")
    if np.any(t < 0.0) or np.any(t >= 1.0):
        raise ValueError("locations must lie in [0, 1)")
    ts = np.sort(t)
    gaps = np.diff(np.append(ts, ts[0] + 1.0))
    if t.size > 1 and gaps.min() < 1e-9:
        raise ValueError("duplicate locations (closer than 1e-9)")
    ell = symmetric_bins(N)
    X = np.exp(-2j * np.pi * np.outer(ell, t)) * kernel_response(kind, ell)[:, None]
    E = np.fft.ifft(np.fft.ifftshift(X, axes=0), axis=0).real
    return SensingModel(locations=t.copy(), kind=kind, matrix=np.ascontiguousarray(E))


def alpha_from_halflife(tau_half: float, fs: float, N: int) -> float:
    """Decay rate per canonical period for an intensity half-life in seconds."""
    if not (tau_half > 0 and fs > 0 and N > 0):
        raise ValueError("tau_half, fs and N must be positive")
    return float(np.log(2.0) * N / (tau_half * fs))


def add_noise(frame: MultiChannelFrame, snr_db: Optional[float], seed=None) -> MultiChannelFrame:
    """
    Add white Gaussian noise at a per-channel SNR.

    Channel ``m`` receives variance ``P_m * 10**(-snr_db / 10)`` with
    ``P_m = mean(x_m**2)``. ``snr_db=None`` returns the frame unchanged.
    ``seed`` may be anything accepted by ``numpy.random.default_rng``.
    """
    if snr_db is None:
        return frame
    rng = np.random.default_rng(seed)
    x = frame.channels
    power = np.mean(x**2, axis=1)
    sigma = np.sqrt(power * 10.0 ** (-snr_db / 10.0))
    noisy = x + sigma[:, None] * rng.standard_normal(x.shape)
    return MultiChannelFrame(channels=noisy, model=frame.model, truth=frame.truth)


def _check_odd(N: int) -> None:
    if int(N) != N or N < 1 or N % 2 == 0:
        raise ValueError(f"N must be a positive odd integer, got {N!r}")
