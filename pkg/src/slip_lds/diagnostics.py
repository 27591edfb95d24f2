"""Theory-side quantities: the relaxed parameters, relaxation bias, the
filter quadratic function, conditional feature covariances and the
block martingale small-ball (BMSB) estimate.

Index conventions follow ``features``: ``psi_i`` is row ``i-1`` of
``bank.filters`` (the k filter values at lag ``i``), and the observation
``y_r`` enters ``f_t`` with weight ``psi_{t-r}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import (
    ComplexSpectrum,
    DimensionMismatch,
    IndexOutOfRange,
    NotDiagonalizable,
    Unsupported,
)
from .features import FeatureBuilder, feature_dim
from .lds import KalmanSolution, LdsParams, Trajectory, psd_sqrt
from .spectral import FilterBank, moment_vectors

__all__ = [
    "RelaxedParams",
    "relaxed_parameters",
    "relaxation_bias",
    "bias_series",
    "filter_quadratic",
    "FilterConditionReport",
    "check_filter_condition",
    "conditional_feature_covariance",
    "BmsbReport",
    "bmsb_empirical",
]

_EIG_TOL = 1e-8


@dataclass(frozen=True)
class RelaxedParams:
    """Coefficients of the Kalman predictor in the spectral feature basis.

    ``theta_tilde`` has the layout of the learned parameters: k output
    blocks (m x m), k input blocks (m x n) and the feedthrough ``D``.
    """

    theta_tilde: np.ndarray
    eigvals: np.ndarray
    right: np.ndarray  # columns v_i
    left: np.ndarray  # rows w_i^T, with left @ right = I
    coefficients: np.ndarray  # (d, k): <mu(lambda_i), phi_j>

    def predict(self, f) -> np.ndarray:
        return self.theta_tilde @ np.asarray(f, dtype=np.float64)


def _real_eig(G: np.ndarray):
    lam, V = np.linalg.eig(G)
    rho = float(np.max(np.abs(lam))) if lam.size else 0.0
    if np.max(np.abs(lam.imag), initial=0.0) > 1e-9 * (rho + 1e-12):
        raise ComplexSpectrum(f"closed-loop matrix has complex eigenvalues {lam}")
    lam = lam.real
    V = V.real
    scale = max(np.linalg.norm(G, 2), np.finfo(float).tiny)
    try:
        W = np.linalg.solve(V, np.eye(V.shape[0]))
    except np.linalg.LinAlgError:
        raise NotDiagonalizable("eigenvector matrix is singular") from None
    d = G.shape[0]
    if (
        np.abs(W @ V - np.eye(d)).max() > _EIG_TOL
        or np.linalg.norm(G @ V - V * lam) > _EIG_TOL * scale
        or np.linalg.norm(W @ G - lam[:, None] * W) > _EIG_TOL * scale
    ):
        raise NotDiagonalizable("eigenvectors fail the biorthogonality or residual check")
    return lam, V, W


def relaxed_parameters(params: LdsParams, sol: KalmanSolution, bank: FilterBank) -> RelaxedParams:
    """Assemble the relaxed parameter matrix from an eigendecomposition of ``G``.

    With ``G = sum_i lambda_i v_i w_i^T`` the Kalman prediction is
    ``m_t = sum_{s>=1} C G^{s-1} (K y_{t-s} + (B - K D) x_{t-s}) + D x_t``.
    Expanding ``lambda^{s-1} = mu(lambda)[s]`` in the filter basis gives output
    block ``j`` as ``sum_i <mu(lambda_i), phi_j> C v_i w_i^T K`` and input block
    ``j`` likewise with ``B - K D``. The inner products use the full
    length-T moment vectors.

    Raises:
        ComplexSpectrum: ``G`` has eigenvalues with non-negligible imaginary part.
        NotDiagonalizable: the eigenvectors are not a usable basis.
    """
    lam, V, W = _real_eig(sol.G)
    if np.any(np.abs(lam) > 1.0 + 1e-12):
        raise ComplexSpectrum(f"closed-loop eigenvalues {lam} leave [-1, 1]")
    lam = np.clip(lam, -1.0, 1.0)
    coef = moment_vectors(bank.T, lam).T @ bank.filters  # (d, k)
    C, K = params.C, sol.K
    m, n, k = params.m, params.n, bank.k
    CV = C @ V
    WK = W @ K
    WBKD = W @ (params.B - K @ params.D)
    theta = np.zeros((m, feature_dim(k, m, n)))
    for j in range(k):
        scaled = CV * coef[:, j]
        theta[:, j * m:(j + 1) * m] = scaled @ WK
        if n:
            theta[:, m * k + j * n: m * k + (j + 1) * n] = scaled @ WBKD
    if n:
        theta[:, m * k + n * k:] = params.D
    return RelaxedParams(theta, lam, V, W, coef)


def relaxation_bias(rel: RelaxedParams, f_t, m_t) -> float:
    """``||theta_tilde f_t - m_t||^2``."""
    f_t = np.asarray(getattr(f_t, "values", f_t), dtype=np.float64)
    m_t = np.atleast_1d(np.asarray(m_t, dtype=np.float64))
    if f_t.shape != (rel.theta_tilde.shape[1],) or m_t.shape != (rel.theta_tilde.shape[0],):
        raise DimensionMismatch("feature or prediction has the wrong length")
    r = rel.theta_tilde @ f_t - m_t
    return float(r @ r)


def bias_series(rel: RelaxedParams, bank: FilterBank, traj: Trajectory, ts: Sequence[int]) -> np.ndarray:
    """Relaxation bias at each (1-based) step in ``ts`` along a trajectory."""
    if traj.kalman_predictions is None:
        raise ValueError("trajectory carries no Kalman predictions")
    m, n = traj.observations.shape[1], traj.inputs.shape[1]
    build = FeatureBuilder(bank, m, n)
    history = np.hstack([traj.observations, traj.inputs])
    out = []
    for t in ts:
        if not 1 <= t <= traj.T:
            raise IndexOutOfRange(f"t={t} outside [1, {traj.T}]")
        f = build(history, traj.inputs[t - 1], t)
        out.append(relaxation_bias(rel, f, traj.kalman_predictions[t - 1]))
    return np.asarray(out)


def _kron_slices(bank: FilterBank, d: int, count: int) -> np.ndarray:
    # psi_tau (x) I_d for tau = 1..count, shape (count, k d, d)
    if count > bank.T:
        raise IndexOutOfRange(f"need {count} filter rows, bank has {bank.T}")
    eye = np.eye(d)
    return np.einsum("tj,ab->tjab", bank.filters[:count], eye).reshape(count, bank.k * d, d)


def _omega_sequence(bank: FilterBank, A: np.ndarray, upto: int) -> np.ndarray:
    """``Omega_t`` for t = 1..upto (index t-1); ``Omega_1 = 0``."""
    d = A.shape[0]
    kd = bank.k * d
    out = np.zeros((upto, kd, kd))
    if upto < 2:
        return out
    psi = _kron_slices(bank, d, upto - 1)
    S = np.zeros((kd, d))
    acc = np.zeros((kd, kd))
    for tau in range(1, upto):
        S = psi[tau - 1] + S @ A
        acc = acc + S @ S.T
        out[tau] = acc
    return out


def filter_quadratic(bank: FilterBank, A, t: int) -> np.ndarray:
    """``Omega_t(A; psi) = sum_{tau<t} S_tau S_tau^T`` with ``S_tau = psi_tau + S_{tau-1} A``.

    ``psi_tau`` here is the ``(k d) x d`` Kronecker slice ``psi_tau (x) I_d``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch("A must be square")
    if t < 2:
        raise IndexOutOfRange(f"t must be >= 2, got {t}")
    return _omega_sequence(bank, A, t)[t - 1]


@dataclass(frozen=True)
class FilterConditionReport:
    s: int
    ts: np.ndarray
    min_eig: np.ndarray  # of t Omega_{s/2} - Omega_{t+1}
    trace: np.ndarray

    @property
    def holds(self) -> np.ndarray:
        return self.min_eig >= -1e-9 * np.maximum(self.trace, 0.0)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.holds))


def check_filter_condition(bank: FilterBank, A, s: int, t_range) -> FilterConditionReport:
    """Margins of the excitation condition ``t Omega_{s/2} - Omega_{t+1} >= 0``.

    Reports rather than decides: the admissible ``s`` depends on unstated
    constants, so callers supply it.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if s < 4 or s % 2:
        raise ValueError(f"s must be even and >= 4, got {s}")
    ts = np.asarray(list(t_range), dtype=int)
    if ts.size == 0 or ts.min() < 1:
        raise ValueError("t_range must hold positive integers")
    upto = max(int(ts.max()) + 1, s // 2)
    omegas = _omega_sequence(bank, A, upto)
    base = omegas[s // 2 - 1]
    mins, traces = [], []
    for t in ts:
        M = t * base - omegas[t]
        mins.append(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
        traces.append(np.trace(M))
    return FilterConditionReport(s, ts, np.asarray(mins), np.asarray(traces))


def _require_input_free(params: LdsParams) -> None:
    if params.n != 0:
        raise Unsupported("the conditional covariance is defined for input-free systems")


def conditional_feature_covariance(params: LdsParams, bank: FilterBank, i: int) -> np.ndarray:
    """``Gamma_i = cov(f_{t+i} | F_t)`` for the output-feature block (``m k`` square).

    Conditioning on everything up to ``y_t`` leaves ``eta_t, ..., eta_{t+i-2}``
    and ``zeta_{t+1}, ..., zeta_{t+i-1}`` random, so

        Gamma_i = sum_{q=1}^{i-1} M_q Q M_q^T + sum_{tau=1}^{i-1} psi_tau R psi_tau^T,
        M_q = psi_q (x) C + M_{q-1} A.

    It does not depend on ``t``.
    """
    _require_input_free(params)
    if i < 1:
        raise IndexOutOfRange(f"i must be >= 1, got {i}")
    m, d, k = params.m, params.d, bank.k
    gamma = np.zeros((m * k, m * k))
    if i == 1:
        return gamma
    psi_m = _kron_slices(bank, m, i - 1)
    M = np.zeros((m * k, d))
    for q in range(1, i):
        M = psi_m[q - 1] @ params.C + M @ params.A
        gamma += M @ params.Q @ M.T + psi_m[q - 1] @ params.R @ psi_m[q - 1].T
    return 0.5 * (gamma + gamma.T)


@dataclass(frozen=True)
class BmsbReport:
    s: int
    t: int
    estimate: float  # minimum over directions
    stderr: float  # of the minimizing direction's estimate
    per_direction: np.ndarray
    p_required: float = 3.0 / 20.0


def future_features(params: LdsParams, bank: FilterBank, traj: Trajectory, t: int, s: int, num_mc: int, rng) -> np.ndarray:
    """Draws of the output features ``f_{t+1..t+s}`` given the first ``t`` steps of ``traj``.

    The state ``h_t`` and observations ``y_1..y_t`` are held fixed; process
    noise from ``eta_t`` on and measurement noise from ``zeta_{t+1}`` on are
    resampled. Returns shape ``(num_mc, s, m k)``.
    """
    _require_input_free(params)
    if t + s > bank.T or t > traj.T:
        raise IndexOutOfRange("t + s exceeds the filter horizon or trajectory")
    m, d, k = params.m, params.d, bank.k
    A, C = params.A, params.C
    sq_q, sq_r = psd_sqrt(params.Q), psd_sqrt(params.R)
    y_past = traj.observations[:t]
    # future observations y_{t+1}..y_{t+s-1}
    h = np.tile(traj.states[t - 1], (num_mc, 1))
    y_future = np.zeros((num_mc, max(s - 1, 0), m))
    for q in range(s - 1):
        h = h @ A.T + rng.standard_normal((num_mc, d)) @ sq_q.T
        y_future[:, q] = h @ C.T + rng.standard_normal((num_mc, m)) @ sq_r.T
    out = np.empty((num_mc, s, m * k))
    Phi = bank.filters
    for i in range(1, s + 1):
        # past part: y_r (r <= t) with weight phi(t+i-r), rows t+i-2 .. i-1
        w_past = Phi[t + i - 2: i - 2: -1] if i >= 2 else Phi[t - 1::-1]
        fixed = w_past.T @ y_past  # (k, m)
        feat = np.broadcast_to(fixed, (num_mc, k, m)).copy()
        if i > 1:
            # y_{t+q}, q = 1..i-1, weight phi(i-q): rows i-2 .. 0
            w_fut = Phi[i - 2::-1]
            feat += np.einsum("qj,nqa->nja", w_fut, y_future[:, : i - 1])
        out[:, i - 1] = feat.reshape(num_mc, k * m)
    return out


def bmsb_empirical(
    params: LdsParams,
    sol: KalmanSolution,
    bank: FilterBank,
    s: int,
    t: int,
    num_mc: int = 2000,
    num_directions: int = 50,
    seed: int = 0,
) -> BmsbReport:
    """Monte-Carlo estimate of ``min_w (1/s) sum_i P(|w^T f_{t+i}| >= sqrt(w^T Gamma_{s/2} w) | F_t)``.

    The past up to ``t`` is one sampled trajectory; directions are uniform on
    the unit sphere. Sampling a finite set of directions can only
    over-estimate the true minimum, so this is a falsification check.
    """
    _require_input_free(params)
    if s < 2 or s % 2:
        raise ValueError(f"s must be even and >= 2, got {s}")
    from .lds import simulate  # local import keeps the module graph acyclic at import time

    ss = np.random.SeedSequence(seed)
    past_seed, noise_seed, dir_seed = ss.spawn(3)
    traj = simulate(params, sol, t, seed=int(past_seed.generate_state(1)[0]), with_kalman=False)
    feats = future_features(params, bank, traj, t, s, num_mc, np.random.default_rng(noise_seed))
    gamma = conditional_feature_covariance(params, bank, s // 2)
    dirs = np.random.default_rng(dir_seed).standard_normal((num_directions, gamma.shape[0]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    thresh = np.sqrt(np.maximum(np.einsum("da,ab,db->d", dirs, gamma, dirs), 0.0))
    proj = np.abs(np.einsum("nia,da->dni", feats, dirs))  # (dirs, draws, s)
    hits = (proj >= thresh[:, None, None]).mean(axis=2)  # (dirs, draws)
    per_dir = hits.mean(axis=1)
    worst = int(np.argmin(per_dir))
    stderr = float(hits[worst].std(ddof=1) / np.sqrt(num_mc)) if num_mc > 1 else float("nan")
    return BmsbReport(s, t, float(per_dir[worst]), stderr, per_dir)
