"""Seeded multi-trial experiments comparing SLIP, the baselines and the Kalman oracle."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigInvalid, SlipError
from .lds import InputSpec, KalmanSolution, LdsParams, simulate, solve_dare
from .predictor import DEFAULT_ALPHA, RegretTrace, run_slip, run_truncated, run_wave
from .spectral import spectral_filters

__all__ = [
    "PREDICTORS",
    "ExperimentConfig",
    "PRESETS",
    "preset",
    "TrialRecord",
    "ExperimentResult",
    "SummaryTable",
    "run_trial",
    "run_experiment",
    "summarize",
    "log_grid",
    "sweep_filters",
    "SweepRow",
    "emit_csv",
    "emit_summary",
    "emit_sweep",
    "emit_svg",
]

log = logging.getLogger(__name__)

PREDICTORS = ("slip", "truncated", "wave", "kalman")
Z99 = 2.576


@dataclass(frozen=True)
class ExperimentConfig:
    system: LdsParams
    T: int = 10_000
    k: int = 20
    alpha: float = DEFAULT_ALPHA
    lookback: int = 20
    trials: int = 100
    base_seed: int = 0
    inputs: InputSpec = field(default_factory=InputSpec)
    predictors: Tuple[str, ...] = PREDICTORS
    name: str = "custom"
    wave_k: int = 20
    wave_reg: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple(self.predictors))
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.system, LdsParams):
            raise ConfigInvalid("system must be an LdsParams")
        if self.T < 10:
            raise ConfigInvalid(f"horizon must be >= 10, got {self.T}")
        if not 1 <= self.k <= self.T:
            raise ConfigInvalid(f"k must be in [1, T], got {self.k}")
        if self.trials < 1:
            raise ConfigInvalid(f"need at least one trial, got {self.trials}")
        if not self.alpha > 0:
            raise ConfigInvalid(f"alpha must be positive, got {self.alpha}")
        if not 1 <= self.lookback <= self.T:
            raise ConfigInvalid(f"lookback must be in [1, T], got {self.lookback}")
        unknown = set(self.predictors) - set(PREDICTORS)
        if unknown or not self.predictors:
            raise ConfigInvalid(f"unknown predictors {sorted(unknown)}; choose from {PREDICTORS}")
        if len(set(self.predictors)) != len(self.predictors):
            raise ConfigInvalid("duplicate predictor names")
        if self.inputs.kind != "none" and self.system.n == 0:
            raise ConfigInvalid("inputs requested for an input-free system")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "system": self.system.to_dict(),
            "T": self.T,
            "k": self.k,
            "alpha": self.alpha,
            "lookback": self.lookback,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "inputs": self.inputs.to_dict(),
            "predictors": list(self.predictors),
            "wave_k": self.wave_k,
            "wave_reg": self.wave_reg,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict) or "system" not in doc:
            raise ConfigInvalid("config must be an object with a 'system' entry")
        known = {"name", "system", "T", "k", "alpha", "lookback", "trials", "base_seed", "inputs", "predictors", "wave_k", "wave_reg"}
        extra = set(doc) - known
        if extra:
            raise ConfigInvalid(f"unknown config keys {sorted(extra)}")
        try:
            kw = {key: doc[key] for key in known & set(doc) if key not in ("system", "inputs")}
            return cls(system=LdsParams.from_dict(doc["system"]), inputs=InputSpec.from_dict(doc.get("inputs")), **kw)
        except ConfigInvalid:
            raise
        except (SlipError, TypeError, ValueError, KeyError) as exc:
            raise ConfigInvalid(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)


def _presets() -> Dict[str, ExperimentConfig]:
    # "N(0, v)" in the figure captions is read as variance v
    sys1 = LdsParams(A=1.0, B=1.0, C=0.001, D=1.0, Q=0.001, R=0.001)
    sys2 = LdsParams(
        A=np.diag([-1.0, 1.0]),
        B=np.zeros((2, 0)),
        C=[[0.1, 0.5]],
        D=np.zeros((1, 0)),
        Q=np.array([[4.0, 6.0], [6.0, 10.0]]) * 1e-3,
        R=0.5,
    )
    sys3 = LdsParams(
        A=[[1.0, 0.0], [0.1, 1.0]],
        B=np.ones((2, 1)),
        C=[[0.0, 0.1], [0.1, 1.0]],
        D=np.ones((2, 1)),
        Q=1e-3 * np.eye(2),
        R=np.eye(2),
    )
    sys_i = LdsParams(A=1.0, B=1.0, C=1.0, D=1.0, Q=0.001, R=0.001)
    return {
        "fig2-system1": ExperimentConfig(sys1, inputs=InputSpec("gaussian", scale=math.sqrt(2.0)), name="fig2-system1"),
        "fig2-system2": ExperimentConfig(sys2, name="fig2-system2"),
        "fig2-system3": ExperimentConfig(sys3, inputs=InputSpec("uniform", low=-0.01, high=0.01), name="fig2-system3"),
        "scalar-robustness": ExperimentConfig(sys_i, inputs=InputSpec("gaussian", scale=math.sqrt(0.5)), name="scalar-robustness"),
    }


PRESETS = _presets()


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigInvalid(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    try:
        return replace(PRESETS[name], **overrides)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc


@dataclass
class TrialRecord:
    """Per-step series of one trial; a predictor missing from ``err_vs_kalman`` is absent."""

    trial: int
    seed: int
    err_vs_obs: Dict[str, np.ndarray]
    err_vs_kalman: Dict[str, np.ndarray]
    cum_regret: Dict[str, np.ndarray]
    failures: Dict[str, str] = field(default_factory=dict)


def run_trial(cfg: ExperimentConfig, trial: int, sol: Optional[KalmanSolution] = None) -> TrialRecord:
    """Simulate trial ``trial`` (seed ``base_seed + trial``) and run every enabled predictor."""
    sol = solve_dare(cfg.system) if sol is None else sol
    seed = cfg.base_seed + trial
    traj = simulate(cfg.system, sol, cfg.T, cfg.inputs, seed=seed)
    trace = RegretTrace.from_trajectory(traj)
    failures: Dict[str, str] = {}
    for name in cfg.predictors:
        if name == "kalman":
            continue
        try:
            if name == "slip":
                run = run_slip(cfg.system, sol, spectral_filters(cfg.T, cfg.k), traj, cfg.alpha)
            elif name == "truncated":
                run = run_truncated(cfg.system, sol, traj, cfg.lookback, cfg.alpha)
            else:
                run = run_wave(cfg.system, traj, cfg.wave_k, cfg.wave_reg)
        except SlipError as exc:
            log.warning("trial %d: %s failed: %s", trial, name, exc)
            failures[name] = f"{type(exc).__name__}: {exc}"
            continue
        if run.absent:
            failures[name] = run.note or "absent"
            continue
        trace.add(run)
    rec = TrialRecord(trial, seed, {}, {}, {}, failures)
    for name in cfg.predictors:
        if name in failures:
            continue
        rec.err_vs_obs[name] = trace.err_vs_obs(name)
        rec.err_vs_kalman[name] = trace.err_vs_kalman(name)
        rec.cum_regret[name] = trace.regret(name)
    return rec


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: List[TrialRecord]

    def stack(self, name: str, what: str = "err_vs_kalman") -> np.ndarray:
        """``(trials_present, T)`` array of one series for one predictor."""
        rows = [getattr(r, what)[name] for r in self.records if name in getattr(r, what)]
        return np.vstack(rows) if rows else np.zeros((0, self.config.T))


def run_experiment(cfg: ExperimentConfig, trials: Optional[Sequence[int]] = None) -> ExperimentResult:
    """Run the trials (all ``cfg.trials`` of them unless a subset is given), sequentially."""
    sol = solve_dare(cfg.system)
    idx = range(cfg.trials) if trials is None else trials
    return ExperimentResult(cfg, [run_trial(cfg, j, sol) for j in idx])


def log_grid(T: int, points: int = 100) -> np.ndarray:
    """Logarithmically spaced 1-based steps in ``[1, T]`` (duplicates after rounding dropped)."""
    return np.unique(np.rint(np.geomspace(1, T, points)).astype(int))


def mean_ci(samples: np.ndarray, axis: int = 0):
    """Mean and normal-approximation 99% interval along ``axis``."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[axis]
    mean = samples.mean(axis=axis)
    if n < 2:
        return mean, mean.copy(), mean.copy()
    half = Z99 * samples.std(axis=axis, ddof=1) / math.sqrt(n)
    return mean, mean - half, mean + half


@dataclass
class SummaryTable:
    """Mean error against the Kalman predictions on a log grid, with 99% intervals."""

    grid: np.ndarray
    mean: Dict[str, np.ndarray]
    ci_lo: Dict[str, np.ndarray]
    ci_hi: Dict[str, np.ndarray]
    final_decade: Dict[str, float]
    final_regret: Dict[str, float]
    trials: Dict[str, int]
    ci_method: str = "normal approximation, mean +/- 2.576 * sd / sqrt(N)"

    @property
    def predictors(self) -> List[str]:
        return list(self.mean)

    def metadata(self) -> dict:
        return {
            "ci_method": self.ci_method,
            "trials": self.trials,
            "final_decade_mean": self.final_decade,
            "mean_cum_regret_at_T": self.final_regret,
        }


def summarize(result: ExperimentResult, points: int = 100) -> SummaryTable:
    T = result.config.T
    grid = log_grid(T, points)
    table = SummaryTable(grid, {}, {}, {}, {}, {}, {})
    lo = T // 10
    for name in result.config.predictors:
        errs = result.stack(name)
        if errs.shape[0] == 0:
            continue
        mean, ci_lo, ci_hi = mean_ci(errs[:, grid - 1])
        table.mean[name], table.ci_lo[name], table.ci_hi[name] = mean, ci_lo, ci_hi
        table.final_decade[name] = float(errs[:, lo:].mean())
        table.final_regret[name] = float(result.stack(name, "cum_regret")[:, -1].mean())
        table.trials[name] = int(errs.shape[0])
    return table


@dataclass(frozen=True)
class SweepRow:
    k: int
    mean: float
    ci_lo: float
    ci_hi: float
    trials: int


def sweep_filters(cfg: ExperimentConfig, k_values: Sequence[int]) -> List[SweepRow]:
    """SLIP error averaged over ``t`` in ``[T/2, T]`` for each filter count, with shared seeds."""
    for k in k_values:
        if not 1 <= k <= cfg.T:
            raise ConfigInvalid(f"k={k} outside [1, T]")
    rows = []
    for k in k_values:
        res = run_experiment(replace(cfg, k=int(k), predictors=("slip", "kalman")))
        errs = res.stack("slip")
        window = errs[:, cfg.T // 2 - 1:].mean(axis=1)
        mean, lo, hi = mean_ci(window)
        rows.append(SweepRow(int(k), float(mean), float(lo), float(hi), int(window.size)))
    return rows


def _fmt(x) -> str:
    return repr(float(x))


def _open(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="")


def emit_csv(result: ExperimentResult, path) -> Path:
    """Per-trial CSV: trial, t, predictor, err_vs_obs, err_vs_kalman, cum_regret."""
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "t", "predictor", "err_vs_obs", "err_vs_kalman", "cum_regret"])
        for rec in result.records:
            for name in result.config.predictors:
                if name not in rec.err_vs_kalman:
                    continue
                obs, kal, reg = rec.err_vs_obs[name], rec.err_vs_kalman[name], rec.cum_regret[name]
                w.writerows(
                    (rec.trial, t + 1, name, _fmt(obs[t]), _fmt(kal[t]), _fmt(reg[t])) for t in range(obs.size)
                )
    return Path(path)


def emit_summary(table: SummaryTable, path, metadata_path=None) -> Path:
    """Summary CSV: predictor, t_grid_point, mean, ci_lo, ci_hi (plus an optional JSON sidecar)."""
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["predictor", "t_grid_point", "mean", "ci_lo", "ci_hi"])
        for name in table.predictors:
            for i, t in enumerate(table.grid):
                w.writerow([name, int(t), _fmt(table.mean[name][i]), _fmt(table.ci_lo[name][i]), _fmt(table.ci_hi[name][i])])
    if metadata_path is not None:
        with _open(metadata_path) as fh:
            json.dump(table.metadata(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return Path(path)


def emit_sweep(rows: Sequence[SweepRow], path) -> Path:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "mean", "ci_lo", "ci_hi", "trials"])
        for r in rows:
            w.writerow([r.k, _fmt(r.mean), _fmt(r.ci_lo), _fmt(r.ci_hi), r.trials])
    return Path(path)


_COLORS = {"slip": "#1f77b4", "truncated": "#d62728", "wave": "#2ca02c", "kalman": "#7f7f7f"}


def emit_svg(table: SummaryTable, path, width: int = 640, height: int = 420) -> Path:
    """Log-log chart of mean error with 99% bands; the Kalman series (identically 0) is skipped."""
    names = [n for n in table.predictors if n != "kalman"]
    pad = 50
    vals = np.concatenate([np.concatenate([table.ci_lo[n], table.mean[n], table.ci_hi[n]]) for n in names]) if names else np.ones(1)
    vals = vals[vals > 0]
    ylo, yhi = (np.log10(vals.min()), np.log10(vals.max())) if vals.size else (0.0, 1.0)
    if yhi - ylo < 1e-9:
        yhi = ylo + 1.0
    xlo, xhi = 0.0, max(np.log10(table.grid[-1]), 1e-9)

    def px(t):
        return pad + (np.log10(t) - xlo) / (xhi - xlo) * (width - 2 * pad)

    def py(v):
        v = np.log10(np.maximum(v, 10**ylo))
        return height - pad - (v - ylo) / (yhi - ylo) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">t (log scale)</text>',
        f'<text x="12" y="{pad - 10}" font-size="12">mean error, 1e{ylo:.1f} to 1e{yhi:.1f}</text>',
    ]
    for i, n in enumerate(names):
        color = _COLORS.get(n, "black")
        xs = px(table.grid)
        band = list(zip(xs, py(table.ci_hi[n]))) + list(zip(xs[::-1], py(table.ci_lo[n])[::-1]))
        parts.append(f'<polygon points="{" ".join(f"{a:.2f},{b:.2f}" for a, b in band)}" fill="{color}" fill-opacity="0.2"/>')
        line = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, py(table.mean[n])))
        parts.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width - pad - 80}" y="{pad + 15 + 15 * i}" font-size="12" fill="{color}">{n}</text>')
    parts.append("</svg>")
    with _open(path) as fh:
        fh.write("\n".join(parts) + "\n")
    return Path(path)
