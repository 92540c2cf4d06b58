"""End-to-end synthetic benchmark: simulate, train, filter, score.

Simulates the nonlinear control ODE, trains on the first 500 steps with
10-step history and test windows, filters the remaining steps, and scores
multi-horizon predictions against the mean-observation and
previous-observation baselines. Writes one CSV row per (model, horizon)
and prints the comparison verdicts.

Usage:
    python3 scripts/run_synth_benchmark.py [--out mse.csv] [--full] [--seed 0]
"""

import argparse
import time

import numpy as np

from hsepsr.learner import train
from hsepsr.simbench import (
    DESK_HORIZONS,
    SynthConfig,
    baseline_mean,
    baseline_prev,
    desk_extents,
    full_extents,
    run_protocol,
    simulate_system,
    write_csv,
)
from hsepsr.windows import Trajectory, WindowConfig

TRAIN_STEPS = 500
LAM = 1e-3
RENORMALIZE = True


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=1600)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--lam", type=float, default=LAM)
    parser.add_argument("--out", default="")
    parser.add_argument(
        "--full", action="store_true", help="every extent instead of every 10th"
    )
    args = parser.parse_args()

    start = time.perf_counter()
    traj = simulate_system(SynthConfig(n_steps=args.steps, seed=args.seed))
    train_traj = Trajectory(
        traj.actions[:TRAIN_STEPS], traj.observations[:TRAIN_STEPS]
    )
    test = Trajectory(traj.actions[TRAIN_STEPS:], traj.observations[TRAIN_STEPS:])
    model = train(train_traj, WindowConfig(10, 10), lam=args.lam)
    print(f"trained on {TRAIN_STEPS} steps in {time.perf_counter() - start:.1f}s")

    horizons = DESK_HORIZONS
    pick = full_extents if args.full else desk_extents
    extents = pick(len(test.observations), horizons)
    common = dict(
        extents=extents,
        horizons=horizons,
        train_size=TRAIN_STEPS,
        seed=args.seed,
        renormalize=RENORMALIZE,
    )
    tables = [
        run_protocol(model, test, **common),
        run_protocol(baseline_mean(train_traj), test, **common),
        run_protocol(baseline_prev(), test, **common),
    ]
    if args.out:
        write_csv(args.out, tables)
        print(f"wrote {args.out}")

    hse, mean, prev = tables
    for h in horizons:
        verdict = "below both" if hse.at(h) < min(mean.at(h), prev.at(h)) else "-"
        print(
            f"h={h:3d}  hse-psr {hse.at(h):.4f}  mean {mean.at(h):.4f}  "
            f"prev {prev.at(h):.4f}  {verdict}"
        )
    short = [h for h in horizons if h <= 10]
    wins = all(hse.at(h) < min(mean.at(h), prev.at(h)) for h in short)
    ratio = hse.at(100) / mean.at(100)
    print(f"horizons 1-10 below both baselines: {'PASS' if wins else 'FAIL'}")
    print(f"h=100 within 1.5x of mean baseline: "
          f"{'PASS' if ratio <= 1.5 else 'FAIL'} (ratio {ratio:.2f})")
    print(f"total wall time {time.perf_counter() - start:.1f}s "
          f"({len(extents)} extents)")
    return 0 if wins and ratio <= 1.5 else 1


if __name__ == "__main__":
    raise SystemExit(main())
