"""Online predictors: SLIP, the truncated-lookback special case and wave filtering.

All learners share one regularized least-squares core. After observing
``y_1..y_t`` with features ``f_1..f_t`` the parameters are

    Theta = (sum_i y_i f_i^T) (sum_i f_i f_i^T + alpha I)^{-1},

recomputed each step. The solve works on a QR-maintained square root of the
Gram matrix rather than the Gram matrix itself (see ``_RootSolver``).
"""

from __future__ import annotations

import math

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, InvalidAlpha, SolveFailure
from .features import FeatureBuilder, FeatureVector, feature_dim
from .lds import KalmanSolution, LdsParams, Trajectory
from .spectral import FilterBank, basis_filters, wave_filters

__all__ = [
    "DEFAULT_ALPHA",
    "PredictorState",
    "slip_init",
    "slip_predict",
    "slip_update",
    "PredictorRun",
    "RegretTrace",
    "run_online",
    "run_slip",
    "run_truncated",
    "truncated_via_slip",
    "run_wave",
    "kalman_run",
]

DEFAULT_ALPHA = 1e-6


@dataclass
class PredictorState:
    theta: np.ndarray  # (m, l)
    gram: np.ndarray  # (l, l)  alpha I + sum f f^T
    cross: np.ndarray  # (m, l)  sum y f^T
    step: int
    alpha: float
    solver: Optional[_RootSolver] = field(default=None, repr=False)

    def __post_init__(self):
        if self.solver is None:
            self.solver = _RootSolver(self.gram.shape[0], self.theta.shape[0], self.alpha)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]


class _RootSolver:
    """Square-root form of the ridge normal equations.

    Keeps an upper-triangular ``R`` and ``z`` with ``R^T R = gram`` and
    ``R^T z = cross^T``. Each new sample is appended as a row and the stack is
    re-triangularized by Householder QR, so ``theta = (R^{-1} z)^T`` is
    computed without squaring the condition number. With the tiny default
    ``alpha`` the Gram matrix itself is often singular to working precision
    once many filters are used, which makes a direct Cholesky solve unreliable.
    """

    def __init__(self, dim: int, m: int, alpha: float):
        self.dim = dim
        self.work = np.zeros((dim + 1, dim + m))
        self.work[:dim, :dim] = math.sqrt(alpha) * np.eye(dim)

    def absorb(self, f: np.ndarray, y: np.ndarray, step: int) -> np.ndarray:
        l = self.dim
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(y))):
            raise SolveFailure(f"non-finite sample at step {step}")
        self.work[l, :l] = f
        self.work[l, l:] = y
        r = np.linalg.qr(self.work, mode="r")
        self.work[:l] = r[:l]
        self.work[l] = 0.0
        try:
            theta = scipy.linalg.solve_triangular(self.work[:l, :l], self.work[:l, l:], check_finite=False).T
        except np.linalg.LinAlgError as exc:
            raise SolveFailure(f"triangular solve failed at step {step}: {exc}") from None
        if not np.all(np.isfinite(theta)):
            raise SolveFailure(f"non-finite parameters at step {step}")
        return theta


def slip_init(bank: FilterBank, m: int, n: int, alpha: float = DEFAULT_ALPHA) -> PredictorState:
    if not alpha > 0:
        raise InvalidAlpha(f"alpha must be positive, got {alpha}")
    l = feature_dim(bank.k, m, n)
    return PredictorState(
        theta=np.zeros((m, l)),
        gram=alpha * np.eye(l),
        cross=np.zeros((m, l)),
        step=0,
        alpha=float(alpha),
    )


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, FeatureVector) else np.asarray(f, dtype=np.float64)


def slip_predict(state: PredictorState, f) -> np.ndarray:
    f = _values(f)
    if f.shape != (state.dim,):
        raise DimensionMismatch(f"feature length {f.size} != {state.dim}")
    return state.theta @ f


def slip_update(state: PredictorState, f, y) -> PredictorState:
    """Absorb ``(f_t, y_t)`` in place and re-solve for ``theta``; returns ``state``."""
    f = _values(f)
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if f.shape != (state.dim,) or y.shape != (state.theta.shape[0],):
        raise DimensionMismatch("feature or observation has the wrong length")
    state.gram += np.outer(f, f)
    state.cross += np.outer(y, f)
    state.theta = state.solver.absorb(f, y, state.step + 1)
    state.step += 1
    return state


@dataclass
class PredictorRun:
    """Predictions of one learner on one trajectory (``None`` when the learner does not apply)."""

    name: str
    predictions: Optional[np.ndarray]
    note: str = ""

    @property
    def absent(self) -> bool:
        return self.predictions is None


@dataclass
class RegretTrace:
    """Per-step errors of several predictors against observations and the Kalman oracle."""

    observations: np.ndarray
    kalman: np.ndarray
    innovations: np.ndarray
    runs: Dict[str, PredictorRun] = field(default_factory=dict)

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "RegretTrace":
        if traj.kalman_predictions is None:
            raise ValueError("trajectory carries no Kalman predictions")
        tr = cls(traj.observations, traj.kalman_predictions, traj.innovations)
        tr.add(PredictorRun("kalman", traj.kalman_predictions))
        return tr

    def add(self, run: PredictorRun) -> None:
        if not run.absent and run.predictions.shape != self.observations.shape:
            raise DimensionMismatch(f"{run.name}: predictions have shape {run.predictions.shape}")
        self.runs[run.name] = run

    @property
    def names(self):
        return list(self.runs)

    def err_vs_obs(self, name: str) -> Optional[np.ndarray]:
        run = self.runs[name]
        if run.absent:
            return None
        return np.sum((self.observations - run.predictions) ** 2, axis=1)

    def err_vs_kalman(self, name: str) -> Optional[np.ndarray]:
        run = self.runs[name]
        if run.absent:
            return None
        return np.sum((run.predictions - self.kalman) ** 2, axis=1)

    def regret(self, name: str) -> Optional[np.ndarray]:
        """Cumulative regret against the Kalman filter, one entry per step."""
        err = self.err_vs_obs(name)
        if err is None:
            return None
        return np.cumsum(err - np.sum(self.innovations**2, axis=1))

    def loss(self, name: str) -> Optional[np.ndarray]:
        """Cumulative squared distance to the Kalman predictions, ``L(t)``."""
        err = self.err_vs_kalman(name)
        return None if err is None else np.cumsum(err)

    def decomposition(self, name: str) -> Optional[np.ndarray]:
        """``L(t) - 2 sum e_s^T (mhat_s - m_s)``, which equals the regret identically."""
        run = self.runs[name]
        if run.absent:
            return None
        cross = np.sum(self.innovations * (run.predictions - self.kalman), axis=1)
        return self.loss(name) - 2.0 * np.cumsum(cross)


def run_online(features, targets: np.ndarray, inputs: np.ndarray, alpha: float, dim: int, offset=None):
    """Generic strict-online ridge loop.

    ``features(history, x_t, t)`` may only read the first ``t-1`` rows of
    ``history``; row ``t-1`` is written after the prediction for step ``t``.
    ``offset(history, t)``, when given, is added to the model output (and subtracted
    from the regression target).
    """
    if not alpha > 0:
        raise InvalidAlpha(f"alpha must be positive, got {alpha}")
    T, m = targets.shape
    n = inputs.shape[1]
    history = np.zeros((T, m + n))
    preds = np.empty((T, m))
    solver = _RootSolver(dim, m, alpha)
    theta = np.zeros((m, dim))
    for t in range(1, T + 1):
        f = features(history, inputs[t - 1], t)
        base = offset(history, t) if offset is not None else 0.0
        preds[t - 1] = theta @ f + base
        # reveal y_t
        history[t - 1, :m] = targets[t - 1]
        history[t - 1, m:] = inputs[t - 1]
        theta = solver.absorb(f, targets[t - 1] - base, t)
    return preds


def _check_run_inputs(params: LdsParams, traj: Trajectory, bank_T: int) -> None:
    if traj.observations.shape[1] != params.m or traj.inputs.shape[1] != params.n:
        raise DimensionMismatch("trajectory does not match the system dimensions")
    if bank_T < traj.T:
        raise ValueError(f"filters cover horizon {bank_T} < trajectory length {traj.T}")


def run_slip(
    params: LdsParams,
    sol: Optional[KalmanSolution],
    bank: FilterBank,
    traj: Trajectory,
    alpha: float = DEFAULT_ALPHA,
    name: str = "slip",
) -> PredictorRun:
    """Algorithm 1 on one trajectory: predict from ``(x_{1:t}, y_{1:t-1})``, then update.

    ``sol`` is unused by the learner; it is accepted so all runners share a
    signature with the harness.
    """
    _check_run_inputs(params, traj, bank.T)
    build = FeatureBuilder(bank, params.m, params.n)
    preds = run_online(build, traj.observations, traj.inputs, alpha, build.dim)
    return PredictorRun(name, preds)


class _LagFeatures:
    # basis-filter features read straight from the buffer: y_{t-1}..y_{t-p}, x_{t-1}..x_{t-p}, x_t
    def __init__(self, p: int, m: int, n: int):
        self.p, self.m, self.n = p, m, n
        self.dim = feature_dim(p, m, n)

    def __call__(self, history, x_t, t):
        p, m, n = self.p, self.m, self.n
        out = np.zeros(self.dim)
        lags = min(p, t - 1)
        if lags:
            block = history[t - 1 - lags: t - 1][::-1]
            out[: lags * m] = block[:, :m].ravel()
            out[p * m: p * m + lags * n] = block[:, m:].ravel()
        out[self.dim - n:] = x_t
        return out


def run_truncated(
    params: LdsParams,
    sol: Optional[KalmanSolution],
    traj: Trajectory,
    p: int = 20,
    alpha: float = DEFAULT_ALPHA,
    name: str = "truncated",
) -> PredictorRun:
    """Online ridge regression on the last ``p`` observations and inputs (zero-padded)."""
    if p < 1:
        raise ValueError(f"lookback must be >= 1, got {p}")
    _check_run_inputs(params, traj, traj.T)
    build = _LagFeatures(p, params.m, params.n)
    preds = run_online(build, traj.observations, traj.inputs, alpha, build.dim)
    return PredictorRun(name, preds)


def truncated_via_slip(params, sol, traj, p: int = 20, alpha: float = DEFAULT_ALPHA) -> PredictorRun:
    """The same learner expressed as SLIP with standard-basis filters."""
    return run_slip(params, sol, basis_filters(traj.T, p), traj, alpha, name="truncated")


class _WaveFeatures:
    # sigma_j^{1/4}-scaled spectral filtering of past inputs, plus x_{t-1} and x_t
    def __init__(self, bank: FilterBank, m: int, n: int):
        self.m, self.n, self.k = m, n, bank.k
        scale = np.clip(bank.sigma, 0.0, None) ** 0.25
        self._rev = np.ascontiguousarray((bank.filters * scale)[::-1])
        self.T = bank.T
        self.dim = n * self.k + 2 * n

    def __call__(self, history, x_t, t):
        n, k, m = self.n, self.k, self.m
        out = np.zeros(self.dim)
        if t > 1:
            out[: n * k] = (self._rev[self.T - t + 1:].T @ history[: t - 1, m:]).ravel()
            out[n * k: n * k + n] = history[t - 2, m:]
        out[n * k + n:] = x_t
        return out


def run_wave(
    params: LdsParams,
    traj: Trajectory,
    k: int = 20,
    reg: float = 1.0,
    name: str = "wave",
) -> PredictorRun:
    """Wave-filtering baseline (experimental).

    Predicts ``y_{t-1} + M g_t`` where ``g_t`` filters past inputs with the
    top eigenvectors of ``Z[i, j] = 2 / ((i+j)^3 - (i+j))`` (scaled by
    ``sigma_j^{1/4}``) and appends ``x_{t-1}, x_t``. ``M`` is the
    follow-the-regularized-leader iterate for squared loss with regularizer
    ``reg * ||M||_F^2``, i.e. a ridge solve on ``y_t - y_{t-1}``.

    Input-free systems yield an absent run.
    """
    if params.n == 0:
        return PredictorRun(name, None, note="wave filtering needs inputs")
    bank = wave_filters(traj.T, min(k, traj.T))
    build = _WaveFeatures(bank, params.m, params.n)
    m = params.m

    def last_obs(history, t):
        return history[t - 2, :m] if t > 1 else np.zeros(m)

    preds = run_online(build, traj.observations, traj.inputs, reg, build.dim, offset=last_obs)
    return PredictorRun(name, preds)


def kalman_run(traj: Trajectory) -> PredictorRun:
    return PredictorRun("kalman", traj.kalman_predictions)
