"""Reading and writing frames, phantoms and trajectories.

Frames go to CSV (one row per node) or to a little-endian binary file: a
32-byte header ``magic, version, N, kind, k0, count`` followed, per frame,
by the time and the node values in row-major (radius, angle) order.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .forward import MuFrame, NuFrame, PolarGrid, RigidTrajectory
from .phantom import Phantom

MAGIC = b"DTMF"
VERSION = 1
HEADER = struct.Struct("<4sIIIdQ")
KIND_MU, KIND_NU = 1, 2


class FrameIOError(OSError):
    """Malformed or unreadable frame, phantom or trajectory file."""


def _kind(frames) -> int:
    if all(isinstance(f, MuFrame) for f in frames):
        return KIND_MU
    if all(isinstance(f, NuFrame) for f in frames):
        return KIND_NU
    raise ValueError("frames must be all MuFrame or all NuFrame")


def _check_grid(frames) -> PolarGrid:
    if not frames:
        raise ValueError("no frames to write")
    grid = frames[0].grid
    if any(f.grid != grid for f in frames):
        raise ValueError("frames live on different grids")
    return grid


def write_frames_binary(frames, path) -> None:
    grid = _check_grid(frames)
    kind = _kind(frames)
    dtype = "<c16" if kind == KIND_MU else "<f8"
    path = Path(path)
    try:
        with path.open("wb") as fh:
            fh.write(HEADER.pack(MAGIC, VERSION, grid.N, kind, float(grid.k0), len(frames)))
            for f in frames:
                fh.write(struct.pack("<d", float(f.time)))
                fh.write(np.ascontiguousarray(f.values, dtype=dtype).tobytes())
    except OSError as exc:
        raise FrameIOError(f"cannot write {path}: {exc}") from exc


def read_frames_binary(path) -> list:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FrameIOError(f"cannot read {path}: {exc}") from exc
    if len(data) < HEADER.size:
        raise FrameIOError(f"{path}: truncated header")
    magic, version, N, kind, k0, count = HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION or kind not in (KIND_MU, KIND_NU):
        raise FrameIOError(f"{path}: not a frame file of version {VERSION}")
    grid = PolarGrid(N, k0)
    dtype = np.dtype("<c16" if kind == KIND_MU else "<f8")
    n_vals = 4 * N * N
    step = 8 + n_vals * dtype.itemsize
    if len(data) != HEADER.size + count * step:
        raise FrameIOError(f"{path}: expected {count} frames")
    cls = MuFrame if kind == KIND_MU else NuFrame
    frames = []
    for i in range(count):
        off = HEADER.size + i * step
        (t,) = struct.unpack_from("<d", data, off)
        vals = np.frombuffer(data, dtype=dtype, count=n_vals, offset=off + 8).reshape(grid.shape)
        frames.append(cls(grid, t, vals.astype(dtype.newbyteorder("="))))
    return frames


def write_frames_csv(frames, path) -> None:
    grid = _check_grid(frames)
    kind = _kind(frames)
    r = np.repeat(grid.radii, 2 * grid.N)
    phi = np.tile(grid.angles, 2 * grid.N)
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "r", "phi", "re", "im"] if kind == KIND_MU else ["time", "r", "phi", "value"])
            for f in frames:
                v = np.asarray(f.values).ravel()
                cols = [np.full(v.size, f.time), r, phi]
                cols += [v.real, v.imag] if kind == KIND_MU else [v]
                w.writerows(np.column_stack(cols).tolist())
    except OSError as exc:
        raise FrameIOError(f"cannot write {path}: {exc}") from exc


def _grid_from_radii(N: int, radii) -> PolarGrid:
    """Grid whose radii reproduce ``radii``; k0 is recovered from the outer
    radius and nudged by a few ulps when rounding moved it."""
    k0 = float(np.max(radii)) * N / (N - 0.5)
    ulp = float(np.spacing(k0))
    for cand in (k0, k0 + ulp, k0 - ulp, k0 + 2 * ulp, k0 - 2 * ulp):
        grid = PolarGrid(N, cand)
        if np.array_equal(grid.radii, radii):
            return grid
    return PolarGrid(N, k0)


def read_frames_csv(path) -> list:
    """Frames from a CSV file; the grid is recovered from the radii."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            header = next(csv.reader(fh))
            rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, StopIteration, ValueError) as exc:
        raise FrameIOError(f"cannot read {path}: {exc}") from exc
    if header == ["time", "r", "phi", "re", "im"]:
        cls, complex_ = MuFrame, True
    elif header == ["time", "r", "phi", "value"]:
        cls, complex_ = NuFrame, False
    else:
        raise FrameIOError(f"{path}: unknown column layout {header}")
    n_nodes = int(np.count_nonzero(rows[:, 0] == rows[0, 0])) if len(rows) else 0
    N = int(round(np.sqrt(n_nodes) / 2))
    if N < 2 or 4 * N * N != n_nodes or len(rows) % n_nodes:
        raise FrameIOError(f"{path}: rows do not form square polar grids")
    grid = _grid_from_radii(N, rows[:n_nodes:2 * N, 1])
    frames = []
    for block in np.split(rows, len(rows) // n_nodes):
        vals = block[:, 3] + 1j * block[:, 4] if complex_ else block[:, 3]
        frames.append(cls(grid, float(block[0, 0]), vals.reshape(grid.shape)))
    return frames


def write_frames(frames, path) -> None:
    """Binary unless the suffix is ``.csv``."""
    (write_frames_csv if str(path).endswith(".csv") else write_frames_binary)(frames, path)


def read_frames(path) -> list:
    return (read_frames_csv if str(path).endswith(".csv") else read_frames_binary)(path)


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise FrameIOError(f"cannot read {path}: {exc}") from exc


def _write_json(obj, path) -> None:
    try:
        Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True))
    except OSError as exc:
        raise FrameIOError(f"cannot write {path}: {exc}") from exc


def write_phantom(ph: Phantom, path) -> None:
    _write_json(ph.to_dict(), path)


def read_phantom(path) -> Phantom:
    try:
        return Phantom.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise FrameIOError(f"{path}: invalid phantom: {exc}") from exc


def trajectory_to_dict(traj: RigidTrajectory) -> dict:
    return {"times": traj.times.tolist(), "rotations": traj.rotations.tolist(),
            "translations": traj.translations.tolist()}


def trajectory_from_dict(d: dict) -> RigidTrajectory:
    return RigidTrajectory(np.asarray(d["times"], dtype=float), np.asarray(d["rotations"], dtype=float),
                           d.get("translations"))


def write_trajectory(traj: RigidTrajectory, path) -> None:
    _write_json(trajectory_to_dict(traj), path)


def read_trajectory(path) -> RigidTrajectory:
    try:
        return trajectory_from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise FrameIOError(f"{path}: invalid trajectory: {exc}") from exc
