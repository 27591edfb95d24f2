"""Filter-count sweep on the scalar robustness preset.

    python3 scripts/sweep_k.py --trials 30 --out results/sweep
"""

import argparse
from dataclasses import replace
from pathlib import Path

from slip_lds.harness import PRESETS, emit_sweep, sweep_filters


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--preset", default="scalar-robustness")
    ap.add_argument("--k-values", default="5,10,15,20,25,30,35")
    ap.add_argument("--out", type=Path, default=Path("results/sweep"))
    args = ap.parse_args()

    cfg = replace(PRESETS[args.preset], trials=args.trials)
    rows = sweep_filters(cfg, [int(k) for k in args.k_values.split(",")])
    emit_sweep(rows, args.out / "sweep.csv")
    lo = min(r.mean for r in rows)
    for r in rows:
        print(f"k={r.k:3d}  mean {r.mean:.4e}  99% CI [{r.ci_lo:.4e}, {r.ci_hi:.4e}]  x{r.mean / lo:.1f} of best")


if __name__ == "__main__":
    main()
