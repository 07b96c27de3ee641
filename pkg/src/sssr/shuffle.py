"""
Cross-channel shuffles.

A shuffle of an M-channel signal with N samples is stored as a binary tensor
``Q`` of shape (M, M, N): ``Q[m, n, p] = 1`` when output channel ``m`` takes
sample ``p`` from input channel ``n``. Every slice ``Q[:, :, p]`` is an M x M
permutation matrix, so samples only move between channels, never in time.

The two-channel case is described by a single mask ``q``: ``q[p] = 1`` keeps
sample ``p`` in place and ``q[p] = 0`` swaps it between the channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .signal_model import MultiChannelFrame

__all__ = [
    "ShuffleAssignment",
    "TwoChannelMask",
    "identity",
    "validate",
    "compose",
    "invert",
    "apply",
    "random_assignment",
    "apply_mask",
    "compose_masks",
    "mask_to_string",
    "mask_from_string",
]


@dataclass(frozen=True, eq=False)
class ShuffleAssignment:
    tensor: NDArray[np.uint8]

    def __post_init__(self):
        Q = np.asarray(self.tensor)
        if Q.ndim != 3 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"tensor must have shape (M, M, N), got {Q.shape}")
        object.__setattr__(self, "tensor", Q.astype(np.uint8, copy=True))

    @property
    def M(self) -> int:
        return self.tensor.shape[0]

    @property
    def N(self) -> int:
        return self.tensor.shape[2]

    @classmethod
    def from_permutations(cls, perms: ArrayLike) -> "ShuffleAssignment":
        """Build from an (N, M) integer array; ``perms[p, m]`` is the source channel of output ``m``."""
        perms = np.asarray(perms, dtype=int)
        N, M = perms.shape
        Q = np.zeros((M, M, N), dtype=np.uint8)
        Q[np.arange(M)[None, :], perms, np.arange(N)[:, None]] = 1
        return cls(Q)

    def permutations(self) -> NDArray[np.int64]:
        """Inverse of :meth:`from_permutations` (only meaningful for valid tensors)."""
        return np.argmax(self.tensor, axis=1).T

    def dense(self) -> NDArray[np.float64]:
        """The MN x MN permutation matrix acting on the stacked channels."""
        M, N = self.M, self.N
        P = np.zeros((M * N, M * N))
        idx = np.arange(N)
        for m in range(M):
            for n in range(M):
                P[m * N + idx, n * N + idx] = self.tensor[m, n]
        return P

    def shuffled_indices(self) -> NDArray[np.int64]:
        """Sample indices whose slice is not the identity."""
        eye = np.eye(self.M, dtype=np.uint8)[:, :, None]
        return np.flatnonzero(np.any(self.tensor != eye, axis=(0, 1)))

    def __eq__(self, other):
        if not isinstance(other, ShuffleAssignment):
            return NotImplemented
        return self.tensor.shape == other.tensor.shape and np.array_equal(self.tensor, other.tensor)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TwoChannelMask:
    q: NDArray[np.uint8]

    def __post_init__(self):
        q = np.asarray(self.q)
        if q.ndim != 1:
            raise ValueError("mask must be 1-D")
        if not np.all((q == 0) | (q == 1)):
            raise ValueError("mask entries must be 0 or 1")
        object.__setattr__(self, "q", q.astype(np.uint8, copy=True))

    @property
    def N(self) -> int:
        return self.q.size

    @property
    def r(self) -> int:
        """Number of samples left in place."""
        return int(self.q.sum())

    def to_assignment(self) -> ShuffleAssignment:
        q = self.q
        Q = np.empty((2, 2, q.size), dtype=np.uint8)
        Q[0, 0] = Q[1, 1] = q
        Q[0, 1] = Q[1, 0] = 1 - q
        return ShuffleAssignment(Q)

    @classmethod
    def from_assignment(cls, a: ShuffleAssignment) -> "TwoChannelMask":
        if a.M != 2:
            raise ValueError("only two-channel assignments reduce to a mask")
        return cls(a.tensor[0, 0])

    def complement(self) -> "TwoChannelMask":
        return TwoChannelMask(1 - self.q)

    def __eq__(self, other):
        if not isinstance(other, TwoChannelMask):
            return NotImplemented
        return np.array_equal(self.q, other.q)

    __hash__ = None


def identity(M: int, N: int) -> ShuffleAssignment:
    Q = np.zeros((M, M, N), dtype=np.uint8)
    Q[np.arange(M), np.arange(M), :] = 1
    return ShuffleAssignment(Q)


def validate(a: ShuffleAssignment) -> bool:
    """True iff every per-sample slice is a permutation matrix."""
    Q = np.asarray(a.tensor if isinstance(a, ShuffleAssignment) else a)
    if Q.ndim != 3 or Q.shape[0] != Q.shape[1]:
        return False
    if not np.all((Q == 0) | (Q == 1)):
        return False
    return bool(np.all(Q.sum(axis=0) == 1) and np.all(Q.sum(axis=1) == 1))


def _check_same_shape(a: ShuffleAssignment, b: ShuffleAssignment) -> None:
    if a.tensor.shape != b.tensor.shape:
        raise ValueError(f"dimension mismatch: {a.tensor.shape} vs {b.tensor.shape}")


def compose(a: ShuffleAssignment, b: ShuffleAssignment) -> ShuffleAssignment:
    """The assignment whose dense matrix is ``a.dense() @ b.dense()``."""
    _check_same_shape(a, b)
    Q = np.einsum("mlp,lnp->mnp", a.tensor.astype(np.int64), b.tensor.astype(np.int64))
    return ShuffleAssignment(Q)


def invert(a: ShuffleAssignment) -> ShuffleAssignment:
    return ShuffleAssignment(np.transpose(a.tensor, (1, 0, 2)))


def apply(a: ShuffleAssignment, frame) -> MultiChannelFrame | NDArray[np.float64]:
    """
    Shuffle a frame: ``y_m[p] = sum_n Q[m, n, p] x_n[p]``.

    Accepts a :class:`MultiChannelFrame` (returns a frame with the same
    metadata) or a bare (M, N) array (returns an array).
    """
    x = frame.channels if isinstance(frame, MultiChannelFrame) else np.asarray(frame)
    if x.shape != (a.M, a.N):
        raise ValueError(f"dimension mismatch: assignment is {(a.M, a.N)}, signal is {x.shape}")
    if x.dtype.kind in "fc":
        y = np.einsum("mnp,np->mp", a.tensor.astype(x.dtype), x)
    else:
        y = np.einsum("mnp,np->mp", a.tensor.astype(float), x)
    if isinstance(frame, MultiChannelFrame):
        return MultiChannelFrame(channels=y, model=frame.model, truth=frame.truth)
    return y


def random_assignment(M: int, N: int, shuffled_count: int, seed=None) -> ShuffleAssignment:
    """
    Shuffle exactly ``shuffled_count`` sample indices.

    The indices are a uniform random subset; each receives a uniformly drawn
    non-identity channel permutation (for M = 2 that is the swap).
    """
    if M < 2:
        raise ValueError("need at least two channels")
    if not 0 <= shuffled_count <= N:
        raise ValueError(f"shuffled_count must lie in [0, {N}], got {shuffled_count}")
    rng = np.random.default_rng(seed)
    perms = np.tile(np.arange(M), (N, 1))
    chosen = np.sort(rng.choice(N, size=shuffled_count, replace=False))
    for p in chosen:
        if M == 2:
            perms[p] = (1, 0)
            continue
        while True:
            cand = rng.permutation(M)
            if np.any(cand != np.arange(M)):
                perms[p] = cand
                break
    return ShuffleAssignment.from_permutations(perms)


def apply_mask(q: ArrayLike, y1: ArrayLike, y2: ArrayLike) -> tuple[NDArray, NDArray]:
    """Two-channel shuffle; since the swap is an involution it also undoes itself."""
    q = np.asarray(q, dtype=float)
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    return q * y1 + (1 - q) * y2, q * y2 + (1 - q) * y1


def compose_masks(q_outer: ArrayLike, q_inner: ArrayLike) -> NDArray[np.uint8]:
    """Mask of applying ``q_inner`` then ``q_outer`` (equal entries keep, otherwise swap)."""
    a = np.asarray(q_outer, dtype=np.uint8)
    b = np.asarray(q_inner, dtype=np.uint8)
    return (a == b).astype(np.uint8)


def mask_to_string(q: ArrayLike) -> str:
    return "".join("1" if v else "0" for v in np.asarray(q))


def mask_from_string(s: str) -> TwoChannelMask:
    if set(s) - {"0", "1"}:
        raise ValueError("mask strings may only contain '0' and '1'")
    return TwoChannelMask(np.frombuffer(s.encode(), dtype=np.uint8) - ord("0"))
