"""Hankel moment matrix of the uniform measure on [-1, 1] and its top eigenvectors.

``H[i, j] = (1 + (-1)^(i+j)) / (2 (i + j - 1))`` (1-based) is the second-moment
matrix of ``mu(lam) = [1, lam, ..., lam^(T-1)]`` under the uniform density
``1/2`` on [-1, 1]. Its leading eigenvectors are the spectral filters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.signal
import scipy.sparse.linalg

from .errors import EigenFailure, InvalidHorizon, LambdaOutOfRange

__all__ = [
    "FilterBank",
    "build_hankel",
    "hankel_matvec",
    "top_eigenpairs",
    "spectral_filters",
    "basis_filters",
    "wave_filters",
    "moment_vectors",
    "reconstruction_error",
    "reconstruction_error_grid",
    "decay_bound",
    "uniform_error_bound",
    "DecayReport",
    "verify_spectral_decay",
]

# above this horizon the dense eigensolver is replaced by matrix-free Lanczos
DENSE_LIMIT = 1000
MAX_HORIZON = 20_000


@dataclass(frozen=True)
class FilterBank:
    """Top-k eigenpairs of a T x T Hankel matrix.

    ``filters`` has shape (T, k); column ``j`` is phi_{j+1}, so row ``i`` is
    the vector psi_{i+1} = [phi_1(i+1), ..., phi_k(i+1)].
    """

    sigma: np.ndarray
    filters: np.ndarray

    @property
    def T(self) -> int:
        return self.filters.shape[0]

    @property
    def k(self) -> int:
        return self.filters.shape[1]

    def truncate(self, k: int) -> "FilterBank":
        if not 1 <= k <= self.k:
            raise ValueError(f"cannot keep {k} of {self.k} filters")
        return FilterBank(self.sigma[:k], self.filters[:, :k])


def _hankel_symbol(T: int) -> np.ndarray:
    # h[s] is the entry for i + j = s + 2 (1-based), s = 0 .. 2T-2
    s = np.arange(2 * T - 1)
    return np.where(s % 2 == 0, 1.0 / (s + 1.0), 0.0)


def build_hankel(T: int) -> np.ndarray:
    if T < 1:
        raise InvalidHorizon(f"T must be >= 1, got {T}")
    h = _hankel_symbol(T)
    return scipy.linalg.hankel(h[:T], h[T - 1:])


def hankel_matvec(T: int, symbol=None):
    """Return ``v -> H v`` for a T x T Hankel matrix without forming it.

    ``symbol`` holds the 2T-1 anti-diagonal values; defaults to the moment matrix.
    """
    h = _hankel_symbol(T) if symbol is None else np.asarray(symbol, dtype=np.float64)

    def matvec(v):
        v = np.asarray(v, dtype=np.float64)
        if v.ndim == 1:
            return scipy.signal.fftconvolve(h, v[::-1])[T - 1:2 * T - 1]
        return scipy.signal.fftconvolve(h[:, None], v[::-1], axes=0)[T - 1:2 * T - 1]

    return matvec


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] *= -1.0
    return vecs


def _check_bank(sigma, vecs, apply, tol: float = 1e-8) -> None:
    k = sigma.size
    gram = vecs.T @ vecs
    if np.abs(gram - np.eye(k)).max() > tol:
        raise EigenFailure("eigenvectors are not orthonormal")
    resid = np.linalg.norm(apply(vecs) - vecs * sigma, axis=0)
    if resid.max() > tol * max(sigma[0], np.finfo(float).tiny):
        raise EigenFailure(f"eigen-residual {resid.max():.2e} exceeds tolerance")
    if np.any(np.diff(sigma) > 1e-12 * sigma[0]) or sigma[-1] < -1e-12:
        raise EigenFailure("eigenvalues not non-increasing and non-negative")


def top_eigenpairs(H: np.ndarray, k: int) -> FilterBank:
    """Top ``k`` eigenpairs of a symmetric matrix, largest first.

    Each eigenvector is signed so its first entry with magnitude above 1e-12
    is positive.
    """
    H = np.asarray(H, dtype=np.float64)
    T = H.shape[0]
    if H.shape != (T, T):
        raise ValueError("H must be square")
    if not 1 <= k <= T:
        raise ValueError(f"k must be in [1, {T}], got {k}")
    w, U = scipy.linalg.eigh(H, subset_by_index=[T - k, T - 1])
    sigma = w[::-1].copy()
    vecs = _fix_signs(U[:, ::-1])
    _check_bank(sigma, vecs, lambda X: H @ X)
    return FilterBank(sigma, vecs)


def _lanczos_eigenpairs(T: int, k: int, symbol=None) -> FilterBank:
    mv = hankel_matvec(T, symbol)
    op = scipy.sparse.linalg.LinearOperator((T, T), matvec=mv, matmat=mv, dtype=np.float64)
    # fixed start vector keeps the result deterministic
    v0 = np.ones(T) / math.sqrt(T)
    w, U = scipy.sparse.linalg.eigsh(op, k=k, which="LA", v0=v0, tol=0.0, ncv=min(T, max(2 * k + 1, k + 20)))
    order = np.argsort(w)[::-1]
    sigma = w[order]
    vecs = _fix_signs(U[:, order])
    _check_bank(sigma, vecs, mv)
    return FilterBank(sigma, vecs)


@lru_cache(maxsize=16)
def _cached_filters(T: int, k: int) -> FilterBank:
    if T <= DENSE_LIMIT:
        return top_eigenpairs(build_hankel(T), k)
    return _lanczos_eigenpairs(T, k)


def spectral_filters(T: int, k: int) -> FilterBank:
    """Spectral filters for horizon ``T``: the top ``k`` eigenpairs of ``build_hankel(T)``.

    Dense for moderate ``T``; matrix-free Lanczos with an FFT Hankel product
    beyond that, so ``T`` up to ``MAX_HORIZON`` stays within memory.
    """
    if T < 1:
        raise InvalidHorizon(f"T must be >= 1, got {T}")
    if T > MAX_HORIZON:
        raise InvalidHorizon(f"T={T} exceeds the dense-eigensolver cap {MAX_HORIZON}")
    if not 1 <= k <= T:
        raise ValueError(f"k must be in [1, {T}], got {k}")
    bank = _cached_filters(T, k)
    bank.filters.setflags(write=False)
    bank.sigma.setflags(write=False)
    return bank


def wave_symbol(T: int) -> np.ndarray:
    """Anti-diagonals of ``Z[i, j] = 2 / ((i+j)^3 - (i+j))``, the wave-filtering Hankel matrix."""
    s = np.arange(2, 2 * T + 1, dtype=np.float64)
    return 2.0 / (s**3 - s)


@lru_cache(maxsize=8)
def wave_filters(T: int, k: int) -> FilterBank:
    """Top ``k`` eigenpairs of the wave-filtering Hankel matrix."""
    if not 1 <= k <= T:
        raise ValueError(f"k must be in [1, {T}], got {k}")
    h = wave_symbol(T)
    if T <= DENSE_LIMIT:
        return top_eigenpairs(scipy.linalg.hankel(h[:T], h[T - 1:]), k)
    return _lanczos_eigenpairs(T, k, h)


def basis_filters(T: int, p: int) -> FilterBank:
    """Standard basis filters e_1..e_p (the truncated-lookback special case)."""
    if not 1 <= p <= T:
        raise ValueError(f"lookback must be in [1, {T}], got {p}")
    return FilterBank(np.ones(p), np.eye(T, p))


def moment_vectors(T: int, lams) -> np.ndarray:
    """Columns ``mu(lam) = [1, lam, ..., lam^(T-1)]`` for each lam, shape (T, len(lams))."""
    lams = np.atleast_1d(np.asarray(lams, dtype=np.float64))
    return np.power.outer(lams, np.arange(T)).T


def reconstruction_error_grid(bank: FilterBank, lams) -> np.ndarray:
    lams = np.atleast_1d(np.asarray(lams, dtype=np.float64))
    if np.any(np.abs(lams) > 1.0):
        raise LambdaOutOfRange("lambda must lie in [-1, 1]")
    M = moment_vectors(bank.T, lams)
    Phi = bank.filters
    resid = M - Phi @ (Phi.T @ M)
    return np.einsum("ij,ij->j", resid, resid)


def reconstruction_error(bank: FilterBank, lam: float) -> float:
    """Squared norm of the part of mu(lam) outside the span of the filters."""
    return float(reconstruction_error_grid(bank, [lam])[0])


def decay_bound(sigma_1: float, T: int, j) -> np.ndarray:
    """``1168 sigma_1 exp(pi^2 / (4 log T))^(-2j)``: upper bound on sigma_{2+2j}."""
    j = np.asarray(j, dtype=np.float64)
    return 1168.0 * sigma_1 * np.exp(-2.0 * j * math.pi**2 / (4.0 * math.log(T)))


def uniform_error_bound(T: int, k: int) -> float:
    """``43 T sqrt(log T) exp(-pi^2 k / (8 log T))``: sup over lam of the squared residual."""
    L = math.log(T)
    return 43.0 * T * math.sqrt(L) * math.exp(-math.pi**2 * k / (8.0 * L))


@dataclass(frozen=True)
class DecayReport:
    T: int
    j: np.ndarray
    sigma: np.ndarray  # sigma_{2+2j}
    bound: np.ndarray
    margin: np.ndarray  # bound - sigma

    @property
    def passed(self) -> bool:
        return bool(np.all(self.sigma <= self.bound))


def verify_spectral_decay(bank: FilterBank, max_index: int = 30) -> DecayReport:
    """Compare sigma_{2+2j} with the exponential decay bound for ``2 + 2j <= min(max_index, k)``."""
    if bank.T < 10:
        raise InvalidHorizon("the decay bound is stated for T >= 10")
    top = min(max_index, bank.k)
    j = np.arange(0, (top - 2) // 2 + 1)
    sig = np.asarray(bank.sigma)[2 + 2 * j - 1]
    bound = decay_bound(float(bank.sigma[0]), bank.T, j)
    return DecayReport(bank.T, j, sig, bound, bound - sig)
