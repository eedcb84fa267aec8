"""Run the standard scenarios and write one report CSV and JSON summary per run.

Example: python3 scripts/run_scenarios.py --out results --grid-n 64 --time-steps 256
"""
import argparse
import logging
from pathlib import Path

from odtmotion.experiment import ExperimentConfig, run_scenario, write_report

RUNS = {
    "constant_axis": dict(scenario="constant_axis"),
    "moving_axis": dict(scenario="moving_axis"),
    "translation_exact_rotations": dict(scenario="with_translation", estimator="infinitesimal",
                                        exact_rotations_for_translation=True),
    "translation_estimated_rotations": dict(scenario="with_translation"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--grid-n", type=int, default=64)
    ap.add_argument("--time-steps", type=int, default=256)
    ap.add_argument("--only", choices=sorted(RUNS), nargs="*")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only or RUNS:
        cfg = ExperimentConfig(N=args.grid_n, time_steps=args.time_steps, **RUNS[name])
        report = run_scenario(cfg)
        write_report(report, out / f"{name}.csv", out / f"{name}.json")
        parts = [f"{k} max {v['max']:.2e} median {v['median']:.2e}" for k, v in report.summary().items()
                 if v and k != "j_min"]
        logging.info("%s (%.0f s): %s", name, sum(report.timings.values()), "; ".join(parts))


if __name__ == "__main__":
    main()
