"""Spectral features of past observations and inputs.

At step ``t`` (1-based) the feature vector is::

    f_t = [ ytil_{t-1}(1) .. ytil_{t-1}(k) | xtil_{t-1}(1) .. xtil_{t-1}(k) | x_t ]
    ytil_{t-1}(j) = sum_{i=1}^{t-1} phi_j(t-i) y_i

so the most recent sample is weighted by ``phi_j(1)``. Its length is
``l = m k + n k + n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HistoryLengthMismatch, IndexOutOfRange
from .spectral import FilterBank

__all__ = ["FeatureVector", "feature_dim", "compute_features", "FeatureBuilder"]


def feature_dim(k: int, m: int, n: int) -> int:
    return m * k + n * k + n


@dataclass(frozen=True)
class FeatureVector:
    t: int
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size


def compute_features(bank: FilterBank, x_hist, y_hist, t: int) -> FeatureVector:
    """Feature vector ``f_t`` from ``x_1..x_t`` (shape (t, n)) and ``y_1..y_{t-1}`` (shape (t-1, m)).

    Raises ``IndexOutOfRange`` for ``t > bank.T`` and ``HistoryLengthMismatch``
    when the history lengths do not match ``t``.
    """
    if not 1 <= t <= bank.T:
        raise IndexOutOfRange(f"t={t} outside [1, {bank.T}]")
    x_hist = np.asarray(x_hist, dtype=np.float64)
    y_hist = np.asarray(y_hist, dtype=np.float64)
    if x_hist.ndim == 1:
        x_hist = x_hist.reshape(t, -1) if x_hist.size else np.zeros((t, 0))
    if y_hist.ndim == 1:
        y_hist = y_hist.reshape(t - 1, -1) if t > 1 else y_hist.reshape(0, -1)
    if x_hist.shape[0] != t or y_hist.shape[0] != t - 1:
        raise HistoryLengthMismatch(
            f"need {t} inputs and {t - 1} observations, got {x_hist.shape[0]} and {y_hist.shape[0]}"
        )
    n = x_hist.shape[1]
    m = y_hist.shape[1]
    k = bank.k
    # rows phi(t-1), ..., phi(1) pair with y_1, ..., y_{t-1}
    W = bank.filters[t - 2::-1] if t > 1 else np.zeros((0, k))
    y_feat = (W.T @ y_hist).ravel()
    x_feat = (W.T @ x_hist[: t - 1]).ravel()
    return FeatureVector(t, np.concatenate([y_feat, x_feat, x_hist[t - 1]]))


class FeatureBuilder:
    """Feature map for the online loop over a pre-allocated history buffer.

    The buffer holds ``[y_i | x_i]`` rows; only rows ``0 .. t-2`` are read at
    step ``t``, so the caller controls causality by what it has written.
    Filters are stored time-reversed so each step reads one contiguous block.
    """

    def __init__(self, bank: FilterBank, m: int, n: int):
        self.bank = bank
        self.m = m
        self.n = n
        self.k = bank.k
        self.dim = feature_dim(bank.k, m, n)
        self._rev = np.ascontiguousarray(bank.filters[::-1])

    def __call__(self, history: np.ndarray, x_t: np.ndarray, t: int) -> np.ndarray:
        T = self.bank.T
        if not 1 <= t <= T:
            raise IndexOutOfRange(f"t={t} outside [1, {T}]")
        out = np.empty(self.dim)
        mk = self.m * self.k
        if t == 1:
            out[: self.dim - self.n] = 0.0
        else:
            block = self._rev[T - t + 1:].T @ history[: t - 1]
            out[:mk] = block[:, : self.m].ravel()
            out[mk: self.dim - self.n] = block[:, self.m:].ravel()
        out[self.dim - self.n:] = x_t
        return out
