"""Simulated motion-estimation experiments: configuration, scenarios, errors and reports."""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .direct import estimate_rotation_direct
from .errors import (AmbiguityError, DegenerateInputError, InsufficientAmplitudeError, OptimizationFailure,
                     RankDeficiencyError)
from .forward import MuFrame, PolarGrid, RigidTrajectory, simulate_frames
from .frames_io import FrameIOError, read_trajectory
from .infinitesimal import estimate_rotations_infinitesimal
from .phantom import Phantom, default_phantom
from .so3 import hat, integrate_rotation, rodrigues_exp
from .stereo import estimate_rotation_stereo
from .translation import estimate_translation_pair

SCENARIOS = ("constant_axis", "moving_axis", "with_translation", "custom")
ESTIMATORS = ("direct", "infinitesimal", "combined", "stereo")
RETRACTIONS = ("polar", "cayley")
CSV_COLUMNS = ("t", "err_pol", "err_cay", "err_cc", "err_translation", "j_min")
DEFAULT_AXIS = (0.96 * np.cos(np.pi / 4), 0.96 * np.sin(np.pi / 4), 0.28)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    ``phantom`` is a phantom dictionary (see :meth:`Phantom.to_dict`), or
    None for the default asymmetric cell. ``trajectory`` is the path of a
    trajectory JSON file and is only read by the ``custom`` scenario.
    """

    scenario: str = "constant_axis"
    estimator: str = "combined"
    retraction: str = "cayley"
    N: int = 64
    time_steps: int = 256
    k0: float = 2.0 * np.pi
    t_end: float = 2.0 * np.pi
    axis: tuple = DEFAULT_AXIS
    a: float = 0.28
    b: float = 0.5
    translation_amplitude: float = 4.0
    seed: int = 0
    noise: float = 0.0
    phantom: Optional[dict] = None
    trajectory: Optional[str] = None
    estimate_translation: Optional[bool] = None  # None: only when the scenario moves the center
    exact_rotations_for_translation: bool = False
    strict: bool = False
    workers: int = 1
    output_csv: Optional[str] = None
    output_json: Optional[str] = None

    def __post_init__(self):
        self.axis = tuple(float(x) for x in self.axis)
        self.validate()

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.retraction not in RETRACTIONS:
            raise ConfigError(f"unknown retraction {self.retraction!r}")
        if self.N < 16:
            raise ConfigError("N must be at least 16")
        if self.time_steps < 8:
            raise ConfigError("time_steps must be at least 8")
        if not self.k0 > 0.0:
            raise ConfigError("k0 must be positive")
        if not self.t_end > 0.0:
            raise ConfigError("t_end must be positive")
        if len(self.axis) != 3:
            raise ConfigError("axis needs three components")
        if self.noise < 0.0:
            raise ConfigError("noise must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.scenario == "custom" and not self.trajectory:
            raise ConfigError("the custom scenario needs a trajectory file")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["axis"] = list(self.axis)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        try:
            return cls.from_dict(data)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def build_phantom(self) -> Phantom:
        return default_phantom() if self.phantom is None else Phantom.from_dict(self.phantom)

    @property
    def grid(self) -> PolarGrid:
        return PolarGrid(self.N, self.k0)

    @property
    def times(self) -> np.ndarray:
        return self.t_end * np.arange(self.time_steps) / self.time_steps


# --- scenarios -----------------------------------------------------------


def constant_axis_trajectory(times, axis=DEFAULT_AXIS) -> RigidTrajectory:
    """Rotation by the angle ``t`` about the fixed unit axis."""
    times = np.asarray(times, dtype=float)
    rots = np.stack([rodrigues_exp(axis, t) for t in times])
    rots[0] = np.eye(3)
    return RigidTrajectory(times, rots, None)


def moving_axis(t, a: float = 0.28, b: float = 0.5) -> np.ndarray:
    """Unit axis tilted by ``arccos a`` from e3 whose azimuth swings as ``b sin(t/2)``."""
    t = np.asarray(t, dtype=float)
    c = np.sqrt(1.0 - a * a)
    az = b * np.sin(0.5 * t)
    return np.stack([c * np.cos(az), c * np.sin(az), np.full_like(az, a)], axis=-1)


def moving_axis_trajectory(times, a: float = 0.28, b: float = 0.5, rtol: float = 1e-12) -> RigidTrajectory:
    """Solution of ``R' = R hat(n(t))``, ``R(0) = I`` with the moving axis ``n``."""
    times = np.asarray(times, dtype=float)

    def rhs(t, y):
        return (y.reshape(3, 3) @ hat(moving_axis(t, a, b))).ravel()

    sol = solve_ivp(rhs, (times[0], times[-1]), np.eye(3).ravel(), method="DOP853", t_eval=times,
                    rtol=rtol, atol=rtol)
    if not sol.success:
        raise RuntimeError(f"trajectory integration failed: {sol.message}")
    rots = sol.y.T.reshape(-1, 3, 3)
    # project away the integration drift
    u, _, vt = np.linalg.svd(rots)
    rots = u @ vt
    rots[0] = np.eye(3)
    return RigidTrajectory(times, rots, None)


def sine_translation(times, amplitude: float = 4.0) -> np.ndarray:
    s = amplitude * np.sin(np.asarray(times, dtype=float))
    out = np.repeat(s[:, None], 3, axis=1)
    out[0] = 0.0
    return out


def scenario_trajectory(cfg: ExperimentConfig) -> RigidTrajectory:
    times = cfg.times
    if cfg.scenario == "constant_axis":
        return constant_axis_trajectory(times, cfg.axis)
    if cfg.scenario == "moving_axis":
        return moving_axis_trajectory(times, cfg.a, cfg.b)
    if cfg.scenario == "with_translation":
        rot = moving_axis_trajectory(times, cfg.a, cfg.b)
        return RigidTrajectory(times, rot.rotations, sine_translation(times, cfg.translation_amplitude))
    return read_trajectory(cfg.trajectory)


# --- errors --------------------------------------------------------------


def frob_rel_error(R_true, R_est) -> float:
    R_true = np.asarray(R_true, dtype=float)
    return float(np.linalg.norm(R_true - np.asarray(R_est, dtype=float)) / np.linalg.norm(R_true))


@dataclass
class StepIssue:
    index: int
    time: float
    stage: str
    message: str
    ambiguity: bool = False


@dataclass
class ErrorReport:
    """Per-step errors of one run. Entries are NaN where a quantity was not computed."""

    config: dict
    times: np.ndarray
    err_pol: np.ndarray
    err_cay: np.ndarray
    err_cc: np.ndarray
    err_translation: np.ndarray
    j_min: np.ndarray
    rotations: np.ndarray = None
    translations: np.ndarray = None
    timings: dict = field(default_factory=dict)
    issues: list = field(default_factory=list)

    @property
    def ambiguous(self) -> bool:
        return any(i.ambiguity for i in self.issues)

    def columns(self) -> dict:
        return {"t": self.times, "err_pol": self.err_pol, "err_cay": self.err_cay, "err_cc": self.err_cc,
                "err_translation": self.err_translation, "j_min": self.j_min}

    def summary(self) -> dict:
        out = {}
        for name, col in self.columns().items():
            if name == "t":
                continue
            col = np.asarray(col, dtype=float)
            ok = col[np.isfinite(col)]
            out[name] = ({"max": float(ok.max()), "median": float(np.median(ok)),
                          "final": float(col[-1]) if np.isfinite(col[-1]) else None}
                         if ok.size else None)
        return out

    @classmethod
    def empty(cls, config: Optional[dict] = None) -> "ErrorReport":
        z = np.zeros(0)
        return cls(config or {}, z, z, z, z, z, z)


def _format(x) -> str:
    return "nan" if not np.isfinite(x) else repr(float(x))


def report_csv(report: ErrorReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    cols = [np.asarray(c, dtype=float) for c in report.columns().values()]
    for row in zip(*cols):
        w.writerow([_format(x) for x in row])
    return buf.getvalue()


def report_json(report: ErrorReport) -> str:
    doc = {
        "config": report.config,
        "summary": report.summary(),
        "timings": {k: round(v, 3) for k, v in report.timings.items()},
        "issues": [asdict(i) for i in report.issues],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def write_report(report: ErrorReport, csv_path=None, json_path=None) -> None:
    """CSV of the per-step columns and a JSON summary. Wall-clock times only go to the JSON."""
    for path, text in ((csv_path, report_csv), (json_path, report_json)):
        if path is None:
            continue
        try:
            Path(path).write_text(text(report))
        except OSError as exc:
            raise FrameIOError(f"cannot write {path}: {exc}") from exc


def read_report_csv(path) -> dict:
    try:
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FrameIOError(f"cannot read {path}: {exc}") from exc
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise FrameIOError(f"{path}: not a report file")
    data = np.array(rows[1:], dtype=float).reshape(-1, len(CSV_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(CSV_COLUMNS)}


# --- running -------------------------------------------------------------


_RECOVERABLE = (AmbiguityError, DegenerateInputError, OptimizationFailure, RankDeficiencyError,
                InsufficientAmplitudeError)


def _map(fn, items, workers: int):
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def _pair_rotation(method: str, nu0, nu, init):
    """Rotation of one frame against the reference frame, plus issues."""
    issues = []
    if method == "stereo":
        return estimate_rotation_stereo(nu0, nu), issues
    try:
        return estimate_rotation_direct(nu0, nu, init), issues
    except AmbiguityError as exc:
        # both degenerate branches fit; fall back to the energy minimization
        issues.append(("direct", str(exc), True))
        return estimate_rotation_direct(nu0, nu, init, check_degenerate=False), issues


@dataclass
class MotionEstimate:
    times: np.ndarray
    rotations: dict  # retraction name -> (T, 3, 3) infinitesimal trajectory
    final: np.ndarray  # (T, 3, 3) rotations of the selected estimator
    translations: Optional[np.ndarray]
    j_min: np.ndarray
    omegas: np.ndarray
    timings: dict
    issues: list

    @property
    def ambiguous(self) -> bool:
        return any(i.ambiguity for i in self.issues)


def estimate_motion(frames, cfg: ExperimentConfig, exact_rotations=None) -> MotionEstimate:
    """Run the configured estimator chain on a frame sequence starting at ``R = I``.

    ``frames`` are ``MuFrame`` (translations can be recovered) or
    ``NuFrame``. Both retractions integrate the same estimated angular
    velocities. The ``combined`` estimator refines every step against
    frame 0 from the infinitesimal rotation of the configured retraction.
    Estimator failures are recorded per step; the run continues.
    ``exact_rotations`` replaces the estimated ones in the translation step.
    """
    mus = frames if isinstance(frames[0], MuFrame) else None
    nus = [f.nu for f in frames] if mus is not None else list(frames)
    n = len(nus)
    times = np.array([f.time for f in nus])
    clock, issues = {}, []

    def issue(j, stage, msg, amb=False):
        issues.append(StepIssue(int(j), float(times[j]), stage, msg, amb))

    tic = time.perf_counter()
    inf = estimate_rotations_infinitesimal(nus, cfg.retraction, skip_unsolvable=True)
    omegas = np.array([w.cartesian for w in inf.omegas])
    other = "polar" if cfg.retraction == "cayley" else "cayley"
    rot = {cfg.retraction: inf.rotations, other: integrate_rotation(times, omegas, other)}
    j_min = np.array([np.nan if s is None else s.j_min for s in inf.scans], dtype=float)
    for j, s in enumerate(inf.scans):
        if s is None:
            issue(j, "infinitesimal", "no angle gives a solvable system; angular velocity set to 0", True)
        elif s.ambiguous:
            issue(j, "infinitesimal", "angular velocity direction is ambiguous", cfg.strict)
    clock["infinitesimal"] = time.perf_counter() - tic

    final = rot[cfg.retraction]
    if cfg.estimator != "infinitesimal":
        tic = time.perf_counter()
        method = "stereo" if cfg.estimator == "stereo" else "direct"

        def step(j):
            if j == 0:
                return np.eye(3), []
            init = final[j] if cfg.estimator == "combined" else None
            try:
                return _pair_rotation(method, nus[0], nus[j], init)
            except _RECOVERABLE as exc:
                return np.full((3, 3), np.nan), [(method, str(exc), isinstance(exc, AmbiguityError))]

        results = _map(step, range(n), cfg.workers)
        final = np.stack([r for r, _ in results])
        for j, (_, msgs) in enumerate(results):
            for stage, msg, amb in msgs:
                issue(j, stage, msg, amb)
        clock[cfg.estimator] = time.perf_counter() - tic

    est_d = None
    if mus is not None and cfg.estimate_translation is not False:
        tic = time.perf_counter()
        rots_used = final if exact_rotations is None else np.asarray(exact_rotations, dtype=float)

        def shift(j):
            if j == 0:
                return np.zeros(3), None
            if not np.all(np.isfinite(rots_used[j])):
                return np.full(3, np.nan), "no rotation estimate"
            try:
                return estimate_translation_pair(mus[0], mus[j], rots_used[0], rots_used[j]), None
            except _RECOVERABLE as exc:
                return np.full(3, np.nan), str(exc)

        results = _map(shift, range(n), cfg.workers)
        est_d = np.stack([d for d, _ in results])
        for j, (_, msg) in enumerate(results):
            if msg:
                issue(j, "translation", msg)
        clock["translation"] = time.perf_counter() - tic

    issues.sort(key=lambda i: (i.index, i.stage))
    return MotionEstimate(times, rot, final, est_d, j_min, omegas, clock, issues)


def simulate_scenario(cfg: ExperimentConfig, traj: Optional[RigidTrajectory] = None, phantom=None):
    """``(trajectory, mu frames)`` of the scenario; the noise is drawn from ``cfg.seed``."""
    ph = cfg.build_phantom() if phantom is None else phantom
    traj = scenario_trajectory(cfg) if traj is None else traj
    rng = np.random.default_rng(cfg.seed)
    return traj, simulate_frames(ph, traj, cfg.grid, cfg.noise, rng)


def run_scenario(cfg: ExperimentConfig, traj: Optional[RigidTrajectory] = None, phantom=None) -> ErrorReport:
    """Simulate the scenario, estimate the motion and compare with the ground truth.

    Translations are estimated when ``cfg.estimate_translation`` is set,
    or by default when the trajectory moves the center.
    """
    cfg.validate()
    tic = time.perf_counter()
    traj, mus = simulate_scenario(cfg, traj, phantom)
    t_sim = time.perf_counter() - tic
    want = cfg.estimate_translation
    if want is None:
        want = bool(np.any(traj.translations != 0.0))
    run_cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "estimate_translation": want})
    exact = traj.rotations if cfg.exact_rotations_for_translation else None
    est = estimate_motion(mus, run_cfg, exact)

    def errs(rots):
        return np.array([frob_rel_error(a, b) for a, b in zip(traj.rotations, rots)])

    nan = np.full(len(traj), np.nan)
    err_cc = errs(est.final) if cfg.estimator != "infinitesimal" else nan
    err_tr = np.linalg.norm(est.translations - traj.translations, axis=1) if est.translations is not None else nan
    timings = {"simulate": t_sim, **est.timings}
    return ErrorReport(cfg.to_dict(), traj.times, errs(est.rotations["polar"]), errs(est.rotations["cayley"]),
                       err_cc, err_tr, est.j_min, est.final, est.translations, timings, est.issues)
