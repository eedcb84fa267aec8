"""Command line entry point.

Exit codes: 0 on success, 2 if any estimation step was ambiguous, 1 on
I/O or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiment import (ESTIMATORS, RETRACTIONS, SCENARIOS, ConfigError, ErrorReport, ExperimentConfig, estimate_motion,
                         read_report_csv, run_scenario, simulate_scenario, write_report)
from .frames_io import FrameIOError, read_frames, write_frames, write_phantom, write_trajectory

log = logging.getLogger("odtmotion")

EXIT_OK, EXIT_IO, EXIT_AMBIGUOUS = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage errors are configuration errors; 2 is reserved for ambiguity
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--method", choices=ESTIMATORS, help="rotation estimator")
    p.add_argument("--retraction", choices=RETRACTIONS)
    p.add_argument("--grid-n", type=int, help="grid parameter N (2N radii, 2N angles)")
    p.add_argument("--time-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=float, help="standard deviation of complex Gaussian noise (default 0)")
    p.add_argument("--workers", type=int)
    p.add_argument("--strict", action="store_true", default=None,
                   help="treat ambiguous angular-velocity scans as ambiguity (exit code 2)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="odtmotion", description="Rigid motion estimation from diffraction data.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate frames of a scenario")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--csv", action="store_true", help="write frames as CSV instead of binary")

    p = sub.add_parser("estimate", help="estimate the motion from a frame file")
    _add_common(p)
    p.add_argument("frames", help="frame file written by 'simulate' (binary or .csv)")
    p.add_argument("--out", required=True, help="output JSON with rotations and translations")

    p = sub.add_parser("run", help="simulate, estimate and report errors")
    _add_common(p)
    p.add_argument("--out", required=True, help="output directory for report.csv and summary.json")

    p = sub.add_parser("report", help="summarize a report CSV")
    p.add_argument("csv", help="report.csv written by 'run'")
    p.add_argument("--out", help="write the summary JSON here instead of stdout")
    return ap


def config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig.from_json(args.config).to_dict() if args.config else {}
    overrides = {"scenario": args.scenario, "estimator": args.method, "retraction": args.retraction,
                 "N": args.grid_n, "time_steps": args.time_steps, "seed": args.seed, "noise": args.noise,
                 "workers": args.workers, "strict": args.strict}
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(base)


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise FrameIOError(f"cannot create {out}: {exc}") from exc
    return out


def _log_issues(issues) -> int:
    for i in issues:
        log.warning("step %d (t=%.6g) %s: %s", i.index, i.time, i.stage, i.message)
    return EXIT_AMBIGUOUS if any(i.ambiguity for i in issues) else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = config_from_args(args)
    out = _outdir(args.out)
    traj, mus = simulate_scenario(cfg)
    write_frames(mus, out / ("frames.csv" if args.csv else "frames.bin"))
    write_trajectory(traj, out / "trajectory.json")
    write_phantom(cfg.build_phantom(), out / "phantom.json")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = config_from_args(args)
    frames = read_frames(args.frames)
    est = estimate_motion(frames, cfg)
    doc = {"config": cfg.to_dict(), "times": est.times.tolist(), "rotations": est.final.tolist(),
           "omegas": est.omegas.tolist(), "j_min": est.j_min.tolist(),
           "translations": None if est.translations is None else est.translations.tolist()}
    try:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True))
    except OSError as exc:
        raise FrameIOError(f"cannot write {args.out}: {exc}") from exc
    return _log_issues(est.issues)


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    out = _outdir(args.out)
    report = run_scenario(cfg)
    write_report(report, out / "report.csv", out / "summary.json")
    for name, stats in report.summary().items():
        if stats:
            log.info("%-16s max %.3e  median %.3e", name, stats["max"], stats["median"])
    return _log_issues(report.issues)


def cmd_report(args) -> int:
    cols = read_report_csv(args.csv)
    report = ErrorReport({}, cols["t"], cols["err_pol"], cols["err_cay"], cols["err_cc"], cols["err_translation"],
                         cols["j_min"])
    text = json.dumps(report.summary(), indent=2, sort_keys=True)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise FrameIOError(f"cannot write {args.out}: {exc}") from exc
    else:
        print(text)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "estimate": cmd_estimate, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FrameIOError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
