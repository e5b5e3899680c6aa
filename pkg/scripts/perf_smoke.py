#!/usr/bin/env python3
"""Timing smoke test on a large random correlation matrix.

Not a benchmark harness — single process, wall-clock seconds, meant to
catch order-of-magnitude regressions in the update-based search loops.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from csskit import search
from csskit.criteria import Criterion, CriterionKind
from csskit.search import SearchConfig


def random_correlation(p: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2 * p, p))
    s = a.T @ a
    d = np.sqrt(np.diag(s))
    return s / np.outer(d, d)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=774)
    ap.add_argument("--k", type=int, default=50)
    ap.add_argument("--restarts", type=int, default=25)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)

    sigma = random_correlation(args.p, seed=4242)
    crit = Criterion(CriterionKind.CSS_TRACE, p=args.p, k=args.k)

    t0 = time.perf_counter()
    g = search.greedy(sigma, SearchConfig(k=args.k, criterion=crit))
    t_greedy = time.perf_counter() - t0
    print(f"greedy   p={args.p} k={args.k}: {t_greedy:7.2f}s  objective {g.objective:.4f}")

    cfg = SearchConfig(
        k=args.k, criterion=crit, restarts=args.restarts, seed=args.seed
    )
    t0 = time.perf_counter()
    s = search.swap(sigma, cfg, threads=args.threads)
    t_swap = time.perf_counter() - t0
    print(
        f"swap x{args.restarts:<3d} p={args.p} k={args.k}: {t_swap:7.2f}s"
        f"  objective {s.objective:.4f}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
