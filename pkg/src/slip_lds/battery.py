"""Fast invariant battery behind the ``verify`` subcommand.

Each check returns a value, the bound it is compared against and the margin
``bound - value`` (non-negative when the check passes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from . import diagnostics as dg
from .lds import (
    InputSpec,
    LdsParams,
    kalman_predict_unrolled,
    observation_matrix,
    riccati_residual,
    simulate,
    solve_dare,
)
from .predictor import PredictorState, RegretTrace, run_slip, slip_update, run_truncated, truncated_via_slip
from .spectral import (
    reconstruction_error_grid,
    spectral_filters,
    uniform_error_bound,
    verify_spectral_decay,
)

__all__ = ["Check", "run_battery", "CHECKS"]


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "bound", float(self.bound))

    @property
    def margin(self) -> float:
        return self.bound - self.value

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.bound)


def _fig2_system2() -> LdsParams:
    return LdsParams(
        A=np.diag([-1.0, 1.0]),
        B=np.zeros((2, 0)),
        C=[[0.1, 0.5]],
        D=np.zeros((1, 0)),
        Q=np.array([[4.0, 6.0], [6.0, 10.0]]) * 1e-3,
        R=0.5,
    )


def _random_system(rng, d: int, n: int, m: int) -> LdsParams:
    A = rng.standard_normal((d, d))
    A *= rng.uniform(0.3, 1.0) / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12)
    Lq = rng.standard_normal((d, d))
    Lr = rng.standard_normal((m, m))
    return LdsParams(
        A=A,
        B=rng.standard_normal((d, n)),
        C=rng.standard_normal((m, d)),
        D=rng.standard_normal((m, n)),
        Q=Lq @ Lq.T / d,
        R=Lr @ Lr.T / m + 0.1 * np.eye(m),
    )


def check_dare() -> Check:
    p = _fig2_system2()
    sol = solve_dare(p)
    return Check("dare_residual_fig2_system2", riccati_residual(p, sol.P), 1e-9 * (1 + np.linalg.norm(sol.P)))


def check_kalman_forms() -> Check:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(5):
        p = _random_system(rng, 3, 1, 2)
        sol = solve_dare(p)
        traj = simulate(p, sol, 120, InputSpec("gaussian"), seed=int(rng.integers(1 << 30)))
        scale = 1.0 + np.abs(traj.kalman_predictions).max()
        for t in (1, 40, 119):
            diff = np.abs(kalman_predict_unrolled(p, sol, traj, t) - traj.kalman_predictions[t]).max()
            worst = max(worst, diff / scale)
    return Check("kalman_recursive_vs_unrolled", worst, 1e-8)


def check_spectral_decay() -> Check:
    worst = -np.inf
    for T in (50, 200):
        rep = verify_spectral_decay(spectral_filters(T, 30))
        worst = max(worst, float(np.max(rep.sigma - rep.bound)))
    return Check("hankel_decay_bound_excess", worst, 0.0)


def check_uniform_reconstruction() -> Check:
    T = 100
    lams = np.linspace(-1.0, 1.0, 2001)
    ratio = 0.0
    for k in (5, 10, 15):
        sup = reconstruction_error_grid(spectral_filters(T, k), lams).max()
        ratio = max(ratio, sup / uniform_error_bound(T, k))
    return Check("uniform_reconstruction_ratio", ratio, 1.0)


def check_average_identity() -> Check:
    T, k = 60, 6
    full = spectral_filters(T, T)
    lams = np.linspace(-1.0, 1.0, 4001)
    err = reconstruction_error_grid(full.truncate(k), lams)
    avg = 0.5 * np.trapezoid(err, lams)
    tail = float(np.sum(full.sigma[k:]))
    return Check("average_error_identity_rel", abs(avg - tail) / tail, 0.01)


def check_batch_rls() -> Check:
    rng = np.random.default_rng(5)
    l, m, alpha = 7, 2, 1e-3
    F = rng.standard_normal((60, l))
    Y = rng.standard_normal((60, m))
    st = PredictorState(np.zeros((m, l)), alpha * np.eye(l), np.zeros((m, l)), 0, alpha)
    for f, y in zip(F, Y):
        slip_update(st, f, y)
    batch = np.linalg.solve(F.T @ F + alpha * np.eye(l), F.T @ Y).T
    return Check("online_vs_batch_rls_rel", np.linalg.norm(st.theta - batch) / np.linalg.norm(batch), 1e-8)


def check_full_basis() -> Check:
    p = LdsParams(A=0.8, B=0.4, C=1.1, D=0.2, Q=0.3, R=0.6)
    sol = solve_dare(p)
    bank = spectral_filters(8, 8)
    traj = simulate(p, sol, 8, InputSpec("gaussian"), seed=2)
    rel = dg.relaxed_parameters(p, sol, bank)
    return Check("full_basis_relaxation_bias", float(dg.bias_series(rel, bank, traj, range(1, 9)).max()), 1e-10)


def check_gamma_monotone() -> Check:
    p = _fig2_system2()
    bank = spectral_filters(200, 10)
    gam = [dg.conditional_feature_covariance(p, bank, i) for i in range(1, 52)]
    worst = max(
        -np.linalg.eigvalsh(gam[i + 1] - gam[i])[0] / max(np.linalg.norm(gam[i + 1]), 1e-300) for i in range(50)
    )
    return Check("gamma_monotonicity_violation", worst, 1e-10)


def check_omega_psd() -> Check:
    bank = spectral_filters(100, 5)
    om = dg.filter_quadratic(bank, np.array([[0.9, 0.2], [0.0, -0.5]]), 60)
    lo = np.linalg.eigvalsh(om)[0]
    return Check("omega_psd_violation", float(max(-lo, 0.0)), 1e-9 * float(np.trace(om)))


def check_siso_bound() -> Check:
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        p = LdsParams(A=rng.uniform(0, 1), B=[], C=rng.uniform(0.1, 2), D=[], Q=rng.uniform(0.01, 1), R=rng.uniform(0.01, 1))
        sol = solve_dare(p)
        worst = max(worst, np.linalg.norm(observation_matrix(p, sol, 200), 2))
    return Check("siso_observation_norm", worst, 1.0 + 1e-10)


def check_regret_identity() -> Check:
    p = _fig2_system2()
    sol = solve_dare(p)
    traj = simulate(p, sol, 400, seed=4)
    tr = RegretTrace.from_trajectory(traj)
    tr.add(run_slip(p, sol, spectral_filters(400, 10), traj))
    reg, dec = tr.regret("slip")[-1], tr.decomposition("slip")[-1]
    return Check("regret_decomposition_rel", abs(reg - dec) / max(abs(reg), 1e-300), 1e-6)


def check_truncated_special_case() -> Check:
    p = LdsParams(A=0.95, B=1.0, C=0.5, D=1.0, Q=0.01, R=0.1)
    sol = solve_dare(p)
    traj = simulate(p, sol, 300, InputSpec("gaussian"), seed=9)
    a = run_truncated(p, sol, traj, 8).predictions
    b = truncated_via_slip(p, sol, traj, 8).predictions
    return Check("truncated_vs_basis_slip_maxdiff", float(np.abs(a - b).max()), 0.0)


CHECKS: List[Callable[[], Check]] = [
    check_dare,
    check_kalman_forms,
    check_spectral_decay,
    check_uniform_reconstruction,
    check_average_identity,
    check_batch_rls,
    check_full_basis,
    check_gamma_monotone,
    check_omega_psd,
    check_siso_bound,
    check_regret_identity,
    check_truncated_special_case,
]


def run_battery() -> List[Check]:
    return [fn() for fn in CHECKS]
