#!/usr/bin/env python3
"""Subset recovery under missing-at-random masking (scenario missing-a1).

Per trial: draw n rows, estimate the covariance pairwise-complete with PSD
projection, run the swapping search at the true size, score against the
population.  Mirrors `csskit simulate --scenario missing-a1` but keeps the
per-trial rows in-process for quick iteration.
"""

from __future__ import annotations

import argparse
import json
import sys

from csskit import simlab


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--n", type=int, default=200, help="rows per trial")
    ap.add_argument("--mar-prob", type=float, default=0.05)
    ap.add_argument("--restarts", type=int, default=10)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--rows-out", default=None, help="optional per-trial CSV")
    args = ap.parse_args(argv)

    rows, summary = simlab.run_missing_study(
        trials=args.trials,
        n=args.n,
        seed=args.seed,
        mar_prob=args.mar_prob,
        restarts=args.restarts,
        threads=args.threads,
    )
    if args.rows_out:
        simlab.write_rows_csv(args.rows_out, rows)
        print(f"wrote {len(rows)} rows to {args.rows_out}", file=sys.stderr)
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
