"""
Small-scale checks of identifiability.

A tall matrix is generic when every K x K row-submatrix is invertible. For the
product of the (unscaled) inverse DFT matrix ``W[i, l] = w**(i l)``,
``w = exp(j 2 pi / N)``, with a Vandermonde matrix ``V[l, k] = v_k**l`` every
row-submatrix factors as ``diag * Cauchy * diag``, which gives its determinant
in closed form.

Uniqueness of shuffled recovery is tested by brute force: a shuffle ``Pi`` of
a block-diagonal model ``A = I_M (x) E`` is ambiguous exactly when
``Pi A b'' = A b'`` has solutions other than channel relabelings
``b' = (P_sigma (x) I) b''``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .shuffle import ShuffleAssignment, TwoChannelMask

__all__ = [
    "GenericityReport",
    "SweepRow",
    "AmbiguousPair",
    "idft_vandermonde",
    "is_generic",
    "cauchy_logdet",
    "uniqueness_oracle",
    "converse_witness",
    "random_generic_matrix",
    "proposition1_sweep",
]

GENERIC_BUDGET = 10**6
DENSE_BUDGET = 64


@dataclass(frozen=True)
class GenericityReport:
    is_generic: bool
    worst_submatrix: tuple
    min_singular_ratio: float


@dataclass(frozen=True)
class AmbiguousPair:
    """Two coefficient stacks whose signals differ but agree after shuffling the first."""

    beta_true: NDArray[np.complex128]
    beta_alt: NDArray[np.complex128]
    residual: float
    separation: float


@dataclass
class SweepRow:
    r: int
    expected_unique: bool
    verdicts: list = field(default_factory=list)
    witnesses_verified: int = 0

    @property
    def matches(self) -> bool:
        return all(v == self.expected_unique for v in self.verdicts)


def idft_vandermonde(v: ArrayLike, N: int, rows: Optional[ArrayLike] = None) -> NDArray[np.complex128]:
    """Rows ``rows`` (all by default) of ``W V`` with the unscaled inverse DFT matrix."""
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    rows = np.arange(N) if rows is None else np.asarray(rows, dtype=int)
    ell = np.arange(N)
    W = np.exp(2j * np.pi * np.outer(rows, ell) / N)
    V = v[None, :] ** ell[:, None]
    return W @ V


def is_generic(E: ArrayLike, tol: float = 1e-10) -> GenericityReport:
    """
    Check that every K x K row-submatrix of the N x K matrix ``E`` is invertible.

    Each submatrix is scored by ``sigma_K / sigma_1`` (0 for an all-zero
    block); the matrix is generic when the smallest score exceeds ``tol``.

    Raises
    ------
    ValueError
        If ``N < K`` or the ``C(N, K)`` submatrices exceed the enumeration budget.
    """
    E = np.asarray(E)
    if E.ndim != 2:
        raise ValueError("E must be a 2-D matrix")
    N, K = E.shape
    if N < K or K < 1:
        raise ValueError(f"need N >= K >= 1, got {E.shape}")
    count = math.comb(N, K)
    if count > GENERIC_BUDGET:
        raise ValueError(f"C({N},{K}) = {count} submatrices exceeds the budget of {GENERIC_BUDGET}")
    worst_ratio = np.inf
    worst = ()
    combos = itertools.combinations(range(N), K)
    while True:
        chunk = np.array(list(itertools.islice(combos, 20000)), dtype=int)
        if chunk.size == 0:
            break
        s = np.linalg.svd(E[chunk], compute_uv=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(s[:, 0] > 0, s[:, -1] / s[:, 0], 0.0)
        i = int(np.argmin(ratio))
        if ratio[i] < worst_ratio:
            worst_ratio = float(ratio[i])
            worst = tuple(int(x) for x in chunk[i])
    return GenericityReport(bool(worst_ratio > tol), worst, worst_ratio)


def cauchy_logdet(L: ArrayLike, v: ArrayLike, N: int) -> complex:
    """
    Closed-form log-determinant of the row-submatrix ``(W V)[L]``.

    With ``x_i = w**(-l_i)`` the entries are ``(1 - v_k**N) / (w**l_i (x_i - v_k))``,
    so the determinant is
    ``prod(1 - v_k**N) prod_{k'<k}(x_k - x_k')(v_k' - v_k) / (prod w**l_i prod_{i,k}(x_i - v_k))``.
    The sum of complex logarithms is returned; its exponential is the
    determinant (the imaginary part is only defined modulo 2 pi).

    Raises
    ------
    ValueError
        On mismatched sizes, repeated rows or nodes, or a node with ``v**N = 1``
        (which is the only case where the determinant vanishes).
    """
    L = np.atleast_1d(np.asarray(L, dtype=int))
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    K = v.size
    if L.size != K or K < 1:
        raise ValueError("need as many row indices as nodes")
    if np.any(L < 0) or np.any(L >= N):
        raise ValueError(f"row indices must lie in [0, {N})")
    if np.unique(L).size != K:
        raise ValueError("row indices must be distinct")
    iu = np.triu_indices(K, 1)
    if K > 1 and np.min(np.abs(v[iu[0]] - v[iu[1]])) < 1e-12:
        raise ValueError("nodes must be distinct")
    vN = v**N
    if np.any(np.abs(vN - 1.0) < 1e-12):
        raise ValueError("nodes with v**N = 1 make the matrix singular")
    x = np.exp(-2j * np.pi * L / N)
    out = np.sum(np.log(1.0 - vN))
    # pairs (k', k) with k' < k
    kp, k = iu
    out += np.sum(np.log(x[k] - x[kp])) + np.sum(np.log(v[kp] - v[k]))
    out -= np.sum(2j * np.pi * L / N)
    out -= np.sum(np.log(x[:, None] - v[None, :]))
    return complex(out)


def _as_assignment(assignment) -> ShuffleAssignment:
    if isinstance(assignment, TwoChannelMask):
        return assignment.to_assignment()
    return assignment


def _shuffle_system(E: NDArray, a: ShuffleAssignment):
    N, K = E.shape
    M = a.M
    if a.N != N:
        raise ValueError(f"assignment has N={a.N}, matrix has N={N}")
    if M * N > DENSE_BUDGET:
        raise ValueError(f"M*N = {M * N} exceeds the dense budget of {DENSE_BUDGET}")
    A = np.kron(np.eye(M), E)
    return np.hstack([a.dense() @ A, -A]), M, K


def _kernel(B: NDArray) -> NDArray:
    _, s, Vh = np.linalg.svd(B)
    thresh = max(B.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0) * 1e3
    rank = int(np.sum(s > thresh))
    return Vh[rank:].conj().T


def _relabel(M: int, K: int, sigma) -> NDArray:
    P = np.zeros((M, M))
    P[np.arange(M), list(sigma)] = 1.0
    return np.kron(P, np.eye(K))


def _relabeling_fits(Z: NDArray, M: int, K: int, tol: float):
    """Channel permutations whose relabeling subspace contains every column of ``Z``."""
    top, bottom = Z[: M * K], Z[M * K:]
    out = []
    for sigma in itertools.permutations(range(M)):
        if np.linalg.norm(_relabel(M, K, sigma) @ top - bottom) <= tol:
            out.append(sigma)
    return out


def uniqueness_oracle(E: ArrayLike, assignment, tol: float = 1e-9) -> bool:
    """
    Whether a shuffle is resolvable up to renaming the channels.

    Computes an orthonormal basis of the kernel of ``[Pi A | -A]`` and tests
    whether it lies inside one relabeling subspace
    ``{(b'', b') : b' = (P_sigma (x) I) b''}``. A subspace contained in a
    finite union of subspaces lies in one of them, so checking each ``sigma``
    separately is exact.

    Parameters
    ----------
    E : array_like, shape (N, K)
        Generic sensing matrix (real or complex).
    assignment : ShuffleAssignment or TwoChannelMask
    tol : float
        Frobenius tolerance of the containment test.

    Raises
    ------
    ValueError
        If ``M * N`` exceeds the dense budget of 64.
    """
    E = np.asarray(E, dtype=complex)
    B, M, K = _shuffle_system(E, _as_assignment(assignment))
    Z = _kernel(B)
    if Z.shape[1] == 0:
        return True
    return bool(_relabeling_fits(Z, M, K, tol))


def converse_witness(E: ArrayLike, assignment, seed=None, tol: float = 1e-9) -> Optional[AmbiguousPair]:
    """
    A concrete pair ``(b'', b')`` with ``Pi A b'' = A b'`` that is not a relabeling.

    A random combination of the kernel basis avoids every proper subspace with
    probability one; the pair is verified before being returned. Returns None
    when the shuffle is resolvable.
    """
    E = np.asarray(E, dtype=complex)
    a = _as_assignment(assignment)
    B, M, K = _shuffle_system(E, a)
    Z = _kernel(B)
    if Z.shape[1] == 0 or _relabeling_fits(Z, M, K, tol):
        return None
    rng = np.random.default_rng(seed)
    A = np.kron(np.eye(M), E)
    for _ in range(10):
        c = rng.standard_normal(Z.shape[1]) + 1j * rng.standard_normal(Z.shape[1])
        z = Z @ c
        z /= np.linalg.norm(z)
        b2, b1 = z[: M * K], z[M * K:]
        residual = float(np.linalg.norm(a.dense() @ A @ b2 - A @ b1))
        separation = min(
            float(np.linalg.norm(A @ (_relabel(M, K, s) @ b2) - A @ b1))
            for s in itertools.permutations(range(M))
        )
        if residual <= tol and separation > 1e3 * tol:
            return AmbiguousPair(b2, b1, residual, separation)
    return None


def random_generic_matrix(N: int, K: int, rng: np.random.Generator, max_draws: int = 100) -> NDArray[np.complex128]:
    """I.i.d. complex Gaussian N x K matrix, re-drawn until it passes :func:`is_generic`."""
    for _ in range(max_draws):
        E = (rng.standard_normal((N, K)) + 1j * rng.standard_normal((N, K))) / np.sqrt(2.0)
        if is_generic(E).is_generic:
            return E
    raise RuntimeError("could not draw a generic matrix")


def proposition1_sweep(N: int, K: int, seed=None, n_matrices: int = 1) -> list[SweepRow]:
    """
    Two-channel uniqueness verdicts for every count ``r`` of unshuffled samples.

    For each ``r`` in ``0..N`` and each of ``n_matrices`` random generic
    matrices, a random mask with ``r`` ones is tested with
    :func:`uniqueness_oracle`; the expected verdict is ``K <= max(r, N - r)``.
    Non-unique verdicts are backed by a verified :func:`converse_witness`.
    """
    if not 1 <= K <= N:
        raise ValueError(f"need 1 <= K <= N, got N={N}, K={K}")
    if n_matrices < 1:
        raise ValueError("n_matrices must be positive")
    rng = np.random.default_rng(seed)
    rows = []
    for r in range(N + 1):
        row = SweepRow(r=r, expected_unique=K <= max(r, N - r))
        for _ in range(n_matrices):
            E = random_generic_matrix(N, K, rng)
            q = np.zeros(N, dtype=np.uint8)
            q[rng.choice(N, size=r, replace=False)] = 1
            mask = TwoChannelMask(q)
            verdict = uniqueness_oracle(E, mask)
            row.verdicts.append(verdict)
            if not verdict and converse_witness(E, mask, seed=rng) is not None:
                row.witnesses_verified += 1
        rows.append(row)
    return rows
