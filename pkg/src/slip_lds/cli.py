"""Command-line entry point.

Exit codes: 0 on success, 1 on configuration errors, 2 when ``verify`` finds
a failing check.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .errors import ConfigInvalid, SlipError
from .harness import (
    PRESETS,
    ExperimentConfig,
    emit_csv,
    emit_summary,
    emit_svg,
    emit_sweep,
    preset,
    run_experiment,
    summarize,
    sweep_filters,
)
from .lds import simulate, solve_dare
from .spectral import spectral_filters, uniform_error_bound, verify_spectral_decay

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", type=Path, help="experiment config (JSON)")
    src.add_argument("--preset", choices=sorted(PRESETS), help="builtin experiment")
    p.add_argument("--trials", type=int, help="number of trials N")
    p.add_argument("--seed", type=int, help="base seed; trial j uses seed + j")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--k", type=int, help="number of spectral filters")
    p.add_argument("--alpha", type=float, help="ridge regularizer")
    p.add_argument("--lookback", type=int, help="truncated-baseline lookback p")
    p.add_argument("--predictors", help="comma-separated subset of slip,truncated,wave,kalman")
    p.add_argument("--T", type=int, dest="horizon", help="horizon override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slip-lds", description="SLIP online prediction benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write one trajectory with Kalman predictions as CSV")
    _common(p)

    p = sub.add_parser("run", help="multi-trial comparison of the predictors")
    _common(p)
    p.add_argument("--svg", action="store_true", help="also write summary.svg")

    p = sub.add_parser("sweep", help="SLIP error over the second half of the horizon versus k")
    _common(p)
    p.add_argument("--k-values", default="5,10,15,20,25,30,35", help="comma-separated filter counts")

    p = sub.add_parser("spectra", help="Hankel eigenvalues against the decay bound")
    p.add_argument("--T", type=int, dest="horizon", default=1000)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--out", type=Path, default=None)

    sub.add_parser("verify", help="run the invariant battery and print a CSV table")
    return parser


def _config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_json(args.config)
    else:
        cfg = preset(args.preset or "fig2-system1")
    over = {}
    for attr, key in (("trials", "trials"), ("seed", "base_seed"), ("k", "k"), ("alpha", "alpha"), ("lookback", "lookback"), ("horizon", "T")):
        val = getattr(args, attr, None)
        if val is not None:
            over[key] = val
    # a short --T without explicit k/lookback clamps the preset defaults
    T = over.get("T", cfg.T)
    for key in ("k", "lookback"):
        if key not in over and getattr(cfg, key) > T:
            over[key] = T
    if args.predictors:
        over["predictors"] = tuple(s.strip() for s in args.predictors.split(",") if s.strip())
    try:
        return replace(cfg, **over)
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from exc


def _cmd_simulate(args) -> int:
    cfg = _config(args)
    sol = solve_dare(cfg.system)
    traj = simulate(cfg.system, sol, cfg.T, cfg.inputs, seed=cfg.base_seed)
    m, n = cfg.system.m, cfg.system.n
    header = ["t"] + [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(m)] + [f"m{i}" for i in range(m)] + [f"e{i}" for i in range(m)]
    block = np.hstack([traj.inputs, traj.observations, traj.kalman_predictions, traj.innovations])
    path = args.out / "trajectory.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, row in enumerate(block, start=1):
            w.writerow([t] + [repr(float(v)) for v in row])
    print(path)
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = _config(args)
    res = run_experiment(cfg)
    table = summarize(res)
    out = args.out
    emit_csv(res, out / "trials.csv")
    emit_summary(table, out / "summary.csv", out / "summary.json")
    if args.svg:
        emit_svg(table, out / "summary.svg")
    print("predictor,trials,final_decade_mean,mean_cum_regret_at_T")
    for name in table.predictors:
        print(f"{name},{table.trials[name]},{table.final_decade[name]!r},{table.final_regret[name]!r}")
    for rec in res.records:
        for name, why in rec.failures.items():
            print(f"# trial {rec.trial}: {name} absent ({why})", file=sys.stderr)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        ks = [int(s) for s in args.k_values.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigInvalid(f"bad --k-values: {exc}") from exc
    rows = sweep_filters(cfg, ks)
    emit_sweep(rows, args.out / "sweep.csv")
    print("k,mean,ci_lo,ci_hi,trials")
    for r in rows:
        print(f"{r.k},{r.mean!r},{r.ci_lo!r},{r.ci_hi!r},{r.trials}")
    return EXIT_OK


def _cmd_spectra(args) -> int:
    T, k = args.horizon, args.k
    if T < 10 or not 1 <= k <= T:
        raise ConfigInvalid("need T >= 10 and 1 <= k <= T")
    bank = spectral_filters(T, k)
    rep = verify_spectral_decay(bank)
    lines = ["j,sigma,decay_bound,margin"]
    bounds = dict(zip((2 + 2 * rep.j).tolist(), rep.bound.tolist()))
    for i, s in enumerate(bank.sigma, start=1):
        b = bounds.get(i)
        lines.append(f"{i},{float(s)!r}," + ("," if b is None else f"{b!r},{b - float(s)!r}"))
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "spectra.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    print(f"# decay bound {'holds' if rep.passed else 'VIOLATED'}; uniform reconstruction bound at k={k}: {uniform_error_bound(T, k)!r}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .battery import run_battery

    checks = run_battery()
    print("check,value,bound,margin,passed")
    for c in checks:
        print(f"{c.name},{c.value!r},{c.bound!r},{c.margin!r},{c.passed}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


COMMANDS = {
    "simulate": _cmd_simulate,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "spectra": _cmd_spectra,
    "verify": _cmd_verify,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SlipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
