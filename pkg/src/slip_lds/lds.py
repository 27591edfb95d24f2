"""Linear dynamical systems: parameters, simulation and the stationary Kalman filter.

Generative model (1-based time)::

    h_{t+1} = A h_t + B x_t + eta_t,    eta_t  ~ N(0, Q)
    y_t     = C h_t + D x_t + zeta_t,   zeta_t ~ N(0, R)

The Kalman filter is kept in predictive form: ``K = A P C^T (C P C^T + R)^{-1}``,
``G = A - K C``, ``V = C P C^T + R``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, IndexOutOfRange, InvalidHorizon, NonConvergence

__all__ = [
    "LdsParams",
    "KalmanSolution",
    "InputSpec",
    "Trajectory",
    "psd_sqrt",
    "riccati_residual",
    "solve_dare",
    "simulate",
    "kalman_predict_recursive",
    "observation_matrix",
    "control_matrix",
    "kalman_predict_unrolled",
]


def _as_matrix(value, rows: int, cols: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.size == 0 and rows * cols == 0:
        return np.zeros((rows, cols))
    if arr.ndim == 0 and rows == cols == 1:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1 and arr.size == rows * cols and (rows == 1 or cols == 1):
        arr = arr.reshape(rows, cols)
    if arr.shape != (rows, cols):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {(rows, cols)}")
    return arr


def _column_block(value, rows: int, n: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.size == 0:
        return np.zeros((rows, n or 0))
    if arr.ndim < 2:
        arr = arr.reshape(rows, -1) if rows > 1 else arr.reshape(1, -1)
    return arr


def _check_psd(M: np.ndarray, name: str) -> None:
    scale = np.linalg.norm(M, 2) if M.size else 0.0
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * (1.0 + scale)):
        raise ValueError(f"{name} is not symmetric")
    if M.size and np.linalg.eigvalsh(M).min() < -1e-10 * scale:
        raise ValueError(f"{name} is not positive semi-definite")


@dataclass(frozen=True)
class LdsParams:
    """System matrices and noise covariances.

    ``B`` and ``D`` may have zero columns for input-free systems. ``Q`` and
    ``R`` must be symmetric PSD; positive definiteness of ``R`` is demanded
    by :func:`solve_dare`, not here, so that noiseless toy systems can still
    be simulated.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        d = A.shape[0]
        if A.shape != (d, d) or d == 0:
            raise DimensionMismatch(f"A must be square and non-empty, got {A.shape}")
        C = np.atleast_2d(np.asarray(self.C, dtype=np.float64))
        m = C.shape[0]
        if C.shape != (m, d) or m == 0:
            raise DimensionMismatch(f"C has shape {C.shape}, expected (m, {d})")
        B = _column_block(self.B, d)
        n = B.shape[1]
        D = _column_block(self.D, m, n)
        if B.shape != (d, n) or D.shape != (m, n):
            raise DimensionMismatch(f"B {B.shape} and D {D.shape} disagree on n")
        Q = _as_matrix(self.Q, d, d, "Q")
        R = _as_matrix(self.R, m, m, "R")
        _check_psd(Q, "Q")
        _check_psd(R, "R")
        for name, val in zip("ABCDQR", (A, B, C, D, Q, R)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "m": self.m,
            **{name: getattr(self, name).tolist() for name in "ABCDQR"},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LdsParams":
        try:
            d, n, m = int(doc["d"]), int(doc["n"]), int(doc["m"])
        except KeyError as exc:
            raise DimensionMismatch(f"missing dimension field {exc}") from None
        shapes = {"A": (d, d), "B": (d, n), "C": (m, d), "D": (m, n), "Q": (d, d), "R": (m, m)}
        mats = {}
        for name, (r, c) in shapes.items():
            raw = doc.get(name, [] if r * c == 0 else None)
            if raw is None:
                raise DimensionMismatch(f"missing matrix {name}")
            mats[name] = _as_matrix(raw, r, c, name)
        return cls(**mats)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "LdsParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class KalmanSolution:
    P: np.ndarray
    K: np.ndarray
    G: np.ndarray
    V: np.ndarray

    @classmethod
    def from_covariance(cls, params: LdsParams, P) -> "KalmanSolution":
        """Derive gain, closed loop and innovation covariance from ``P``."""
        P = _as_matrix(P, params.d, params.d, "P")
        A, C, R = params.A, params.C, params.R
        V = C @ P @ C.T + R
        # K = A P C^T V^{-1}; lstsq keeps the degenerate V = 0 case (noiseless toys) finite
        APCt = A @ P @ C.T
        K = np.linalg.lstsq(V.T, APCt.T, rcond=None)[0].T
        return cls(P=P, K=K, G=A - K @ C, V=V)


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Square-root factor ``L`` with ``L L^T = M``.

    Cholesky when ``M`` is positive definite, otherwise the symmetric square
    root from ``eigh`` with negative eigenvalues clamped to zero.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return M.copy()
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w, U = np.linalg.eigh(0.5 * (M + M.T))
        return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def riccati_residual(params: LdsParams, P: np.ndarray) -> float:
    """Frobenius norm of ``P - (A P A^T - A P C^T (C P C^T + R)^{-1} C P A^T + Q)``."""
    A, C, Q, R = params.A, params.C, params.Q, params.R
    APCt = A @ P @ C.T
    S = C @ P @ C.T + R
    rhs = A @ P @ A.T - APCt @ np.linalg.solve(S, APCt.T) + Q
    return float(np.linalg.norm(P - rhs))


def _riccati_step(A, C, Q, R, P):
    APCt = A @ P @ C.T
    S = C @ P @ C.T + R
    P_next = A @ P @ A.T - APCt @ np.linalg.solve(S, APCt.T) + Q
    return 0.5 * (P_next + P_next.T)


def _doubling(A, C, Q, R, max_doublings: int = 200):
    # structure-preserving doubling for the filtering DARE (dual of the control form)
    d = A.shape[0]
    I = np.eye(d)
    Ak = A.T.copy()
    Gk = C.T @ np.linalg.solve(R, C)
    Hk = Q.copy()
    for _ in range(max_doublings):
        W = I + Gk @ Hk
        WinvA = np.linalg.solve(W, Ak)
        WinvG = np.linalg.solve(W, Gk)
        H_next = Hk + Ak.T @ Hk @ WinvA
        G_next = Gk + Ak @ WinvG @ Ak.T
        A_next = Ak @ WinvA
        H_next = 0.5 * (H_next + H_next.T)
        G_next = 0.5 * (G_next + G_next.T)
        if not np.all(np.isfinite(H_next)):
            break
        done = np.linalg.norm(H_next - Hk) <= 1e-15 * (1.0 + np.linalg.norm(H_next))
        Ak, Gk, Hk = A_next, G_next, H_next
        if done:
            break
    return Hk


def solve_dare(
    params: LdsParams,
    tol: float = 1e-12,
    max_iter: int = 10**6,
    method: str = "doubling",
) -> KalmanSolution:
    """Stationary predictive Kalman filter.

    ``method="fixed_point"`` iterates the Riccati map from ``P_0 = Q``;
    ``method="doubling"`` jumps close to the fixed point with a doubling
    recursion first and then polishes with the same fixed-point map. Both stop
    once the Riccati residual is at most ``tol * (1 + ||P||_F)``.

    Raises
    ------
    NonConvergence
        If the residual target is not met within ``max_iter`` fixed-point steps.
    """
    A, C, Q, R = params.A, params.C, params.Q, params.R
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise ValueError("R must be positive definite for the Kalman filter") from None
    # divergent iterates are detected through the residual check below
    with np.errstate(over="ignore", invalid="ignore"):
        return _solve_dare(params, tol, max_iter, method)


def _solve_dare(params: LdsParams, tol: float, max_iter: int, method: str) -> KalmanSolution:
    A, C, Q, R = params.A, params.C, params.Q, params.R
    if method == "doubling":
        P = _doubling(A, C, Q, R)
        if not np.all(np.isfinite(P)):
            P = Q.copy()
    elif method == "fixed_point":
        P = Q.copy()
    else:
        raise ValueError(f"unknown method {method!r}")

    res = riccati_residual(params, P)
    it = 0
    while res > tol * (1.0 + np.linalg.norm(P)) and it < max_iter:
        P = _riccati_step(A, C, Q, R, P)
        it += 1
        # checking the residual is as costly as a step; do it sparsely once far from done
        if it < 64 or it % 64 == 0:
            res = riccati_residual(params, P)
    res = riccati_residual(params, P)
    if not np.isfinite(res) or res > tol * (1.0 + np.linalg.norm(P)):
        raise NonConvergence(f"Riccati residual {res:.3e} after {it} iterations")
    return KalmanSolution.from_covariance(params, P)


@dataclass(frozen=True)
class InputSpec:
    """Input sequence generator.

    kind: ``"none"`` (all zeros), ``"gaussian"`` (i.i.d. N(0, scale^2) per
    coordinate), ``"uniform"`` (i.i.d. U(low, high)) or ``"fixed"`` (``values``
    of shape (T, n), reused verbatim).
    """

    kind: str = "none"
    scale: float = 1.0
    low: float = 0.0
    high: float = 1.0
    values: Optional[Sequence] = None

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "uniform", "fixed"):
            raise ValueError(f"unknown input kind {self.kind!r}")
        if self.kind == "fixed" and self.values is None:
            raise ValueError("fixed inputs need values")

    def generate(self, T: int, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "none" or n == 0:
            return np.zeros((T, n))
        if self.kind == "gaussian":
            return self.scale * rng.standard_normal((T, n))
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size=(T, n))
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1, n)
        if vals.shape[0] < T:
            raise DimensionMismatch(f"fixed inputs cover {vals.shape[0]} < {T} steps")
        return vals[:T].copy()

    def to_dict(self) -> dict:
        doc = {"kind": self.kind}
        if self.kind == "gaussian":
            doc["scale"] = self.scale
        elif self.kind == "uniform":
            doc.update(low=self.low, high=self.high)
        elif self.kind == "fixed":
            doc["values"] = np.asarray(self.values).tolist()
        return doc

    @classmethod
    def from_dict(cls, doc: Optional[dict]) -> "InputSpec":
        return cls(**doc) if doc else cls()


@dataclass
class Trajectory:
    """Row ``t-1`` of every array holds the quantity at time ``t``."""

    inputs: np.ndarray
    observations: np.ndarray
    states: Optional[np.ndarray] = None
    kalman_predictions: Optional[np.ndarray] = None
    innovations: Optional[np.ndarray] = None
    seed: Optional[int] = field(default=None, compare=False)

    @property
    def T(self) -> int:
        return self.observations.shape[0]


def simulate(
    params: LdsParams,
    sol: KalmanSolution,
    T: int,
    input_gen: InputSpec = InputSpec(),
    seed: int = 0,
    h1: Optional[np.ndarray] = None,
    with_kalman: bool = True,
) -> Trajectory:
    """Draw one trajectory of length ``T``.

    Sampling is reproducible: ``SeedSequence(seed)`` is spawned into four
    PCG64 streams used for the initial state, process noise, measurement
    noise and inputs, each drawn in one block of standard normals (inputs
    through :meth:`InputSpec.generate`). ``h_1 = sqrt(P) z`` unless ``h1`` is
    given explicitly.
    """
    if T < 1:
        raise InvalidHorizon(f"T must be >= 1, got {T}")
    d, n, m = params.d, params.n, params.m
    if sol.P.shape != (d, d):
        raise DimensionMismatch("Kalman solution does not match the system")
    s_init, s_proc, s_meas, s_inp = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)
    )
    z0 = s_init.standard_normal(d)
    eta = s_proc.standard_normal((T, d)) @ psd_sqrt(params.Q).T
    zeta = s_meas.standard_normal((T, m)) @ psd_sqrt(params.R).T
    x = input_gen.generate(T, n, s_inp)

    h = np.empty((T, d))
    h[0] = psd_sqrt(sol.P) @ z0 if h1 is None else np.asarray(h1, dtype=np.float64).reshape(d)
    A, B = params.A, params.B
    drive = x @ B.T + eta
    for t in range(T - 1):
        h[t + 1] = A @ h[t] + drive[t]
    y = h @ params.C.T + x @ params.D.T + zeta

    traj = Trajectory(inputs=x, observations=y, states=h, seed=seed)
    if with_kalman:
        traj.kalman_predictions, traj.innovations = kalman_predict_recursive(params, sol, traj)
    return traj


def _check_traj(params: LdsParams, traj: Trajectory) -> None:
    if traj.observations.ndim != 2 or traj.observations.shape[1] != params.m:
        raise DimensionMismatch("observation dimension does not match C")
    if traj.inputs.shape != (traj.T, params.n):
        raise DimensionMismatch("input dimension does not match B")


def kalman_predict_recursive(params: LdsParams, sol: KalmanSolution, traj: Trajectory):
    """One-step predictions ``m_t`` and innovations ``e_t`` from ``h_{1|0} = 0``."""
    _check_traj(params, traj)
    x, y = traj.inputs, traj.observations
    C, D, K, G = params.C, params.D, sol.K, sol.G
    BKD = params.B - K @ D
    # the observation-free part of each step is precomputed in bulk
    drive = y @ K.T + x @ BKD.T
    direct = x @ D.T
    T = traj.T
    h = np.zeros(params.d)
    preds = np.empty((T, params.m))
    for t in range(T):
        preds[t] = C @ h + direct[t]
        h = G @ h + drive[t]
    return preds, y - preds


def _markov_blocks(params: LdsParams, sol: KalmanSolution, right: np.ndarray, t: int) -> np.ndarray:
    if t < 1:
        raise InvalidHorizon(f"t must be >= 1, got {t}")
    cols = right.shape[1]
    out = np.empty((params.m, cols * t))
    row = params.C.copy()
    # block for lag j sits at position t-1-j (oldest sample first)
    for j in range(t):
        out[:, (t - 1 - j) * cols:(t - j) * cols] = row @ right
        row = row @ sol.G
    return out


def observation_matrix(params: LdsParams, sol: KalmanSolution, t: int) -> np.ndarray:
    """``O_t = [C G^{t-1} K | ... | C G K | C K]`` of shape (m, m t)."""
    return _markov_blocks(params, sol, sol.K, t)


def control_matrix(params: LdsParams, sol: KalmanSolution, t: int) -> np.ndarray:
    """``C_t = [C G^{t-1} (B-KD) | ... | C (B-KD)]`` of shape (m, n t)."""
    return _markov_blocks(params, sol, params.B - sol.K @ params.D, t)


def kalman_predict_unrolled(
    params: LdsParams, sol: KalmanSolution, traj: Trajectory, t: int
) -> np.ndarray:
    """``m_{t+1} = O_t y_{1:t} + C_t x_{1:t} + D x_{t+1}`` for ``1 <= t < T``."""
    _check_traj(params, traj)
    if not 1 <= t < traj.T:
        raise IndexOutOfRange(f"t={t} outside [1, {traj.T - 1}]")
    pred = observation_matrix(params, sol, t) @ traj.observations[:t].ravel()
    if params.n:
        pred = pred + control_matrix(params, sol, t) @ traj.inputs[:t].ravel()
        pred = pred + params.D @ traj.inputs[t]
    return pred
