"""Relative rotation of two frames by minimizing the common-circle mismatch energy."""
from __future__ import annotations

import itertools
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.ndimage import minimum_filter
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from .arcs import beta_grid, detect_degenerate, gamma_dual_euler, gamma_euler
from .errors import EmptySupportError, OptimizationFailure
from .forward import NuFrame
from .so3 import EulerZYZ, axis_rotation_y, axis_rotation_z, euler_angles, euler_to_rotation, rotation_to_euler

SIMPLEX_STEP = 0.05
NM_TOL = 1e-8
NM_MAX_ITER = 200
COARSE_SHAPE = (16, 8, 16)
FINE_SHAPE = (128, 64, 128)
GRID_BETAS = 33
N_SCREEN = 32
N_FINAL = 2


class EnergyEvaluation(NamedTuple):
    euler: EulerZYZ
    energy: float
    n_valid_samples: int


def arc_samples(e, betas, k0: float):
    """Disk points of the four arcs entering the energy at Euler triple ``e``:
    (t-primal, s-primal, t-dual, s-dual)."""
    phi, theta, psi = e
    return (
        gamma_euler(np.pi - psi, theta, -betas, k0),
        gamma_euler(phi, theta, betas, k0),
        gamma_dual_euler(np.pi - psi, theta, betas, k0),
        gamma_dual_euler(phi, theta, betas, k0),
    )


def energy(nu_s: NuFrame, nu_t: NuFrame, e, n_beta: Optional[int] = None) -> EnergyEvaluation:
    """Mean squared mismatch of ``nu_s`` and ``nu_t`` along the primal and
    dual arcs implied by the Euler triple ``e`` of ``Rs^T Rt``.

    Samples that leave the covered disk are skipped.
    """
    if nu_s.grid != nu_t.grid:
        raise ValueError("frames live on different grids")
    betas = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n_beta) if n_beta else beta_grid(nu_s.grid.N)
    gt, gs, gt_d, gs_d = arc_samples(e, betas, nu_s.grid.k0)
    diff = nu_t(np.concatenate([gt, gt_d])) - nu_s(np.concatenate([gs, gs_d]))
    valid = np.isfinite(diff)
    n = int(valid.sum())
    if n == 0:
        raise EmptySupportError("no arc sample inside the covered disk")
    return EnergyEvaluation(EulerZYZ(*map(float, e)), float(np.mean(diff[valid] ** 2)), n)


def energy_batch(nu_s: NuFrame, nu_t: NuFrame, eulers, n_beta: Optional[int] = None) -> np.ndarray:
    """Energies of many Euler triples (rows of ``eulers``) in one pass; inf
    where no sample is valid."""
    e = np.atleast_2d(np.asarray(eulers, dtype=float))
    betas = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n_beta) if n_beta else beta_grid(nu_s.grid.N)
    gt, gs, gt_d, gs_d = arc_samples(tuple(e[:, i, None] for i in range(3)), betas, nu_s.grid.k0)
    diff = nu_t(np.concatenate([gt, gt_d], axis=1)) - nu_s(np.concatenate([gs, gs_d], axis=1))
    return mean_square_rows(diff)


def mean_square_rows(diff: np.ndarray) -> np.ndarray:
    ok = np.isfinite(diff)
    n = ok.sum(axis=1)
    sq = np.where(ok, diff, 0.0) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, sq.sum(axis=1) / np.maximum(n, 1), np.inf)


_COMPASS = np.vstack([np.eye(3), -np.eye(3)] + [
    s * (np.eye(3)[i] + t * np.eye(3)[j]) / np.sqrt(2.0)
    for i, j in ((0, 1), (0, 2), (1, 2)) for s in (1.0, -1.0) for t in (1.0, -1.0)
])


def compass_search(objective: Callable, starts, step: float, min_step: float = 2e-3,
                   max_iter: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """Pattern search from many starts at once.

    ``objective(points, owner)`` maps an (M, 3) array of points to M values;
    ``owner[m]`` is the index of the start that point ``m`` belongs to. Each start
    moves to the best of 18 neighbors (axes and face diagonals at distance
    ``step``) when that improves, otherwise its step is halved, until all
    steps fall below ``min_step``. Returns (values, points).
    """
    x = np.array(starts, dtype=float)
    fx = np.asarray(objective(x, np.arange(len(x))), dtype=float)
    h = np.full(len(x), float(step))
    for _ in range(max_iter):
        act = np.flatnonzero(h >= min_step)
        if act.size == 0:
            break
        trial = x[act, None, :] + h[act, None, None] * _COMPASS
        owner = np.repeat(act, len(_COMPASS))
        ft = np.asarray(objective(trial.reshape(-1, 3), owner), dtype=float).reshape(len(act), -1)
        k = np.argmin(ft, axis=1)
        fbest = ft[np.arange(len(act)), k]
        move = fbest < fx[act]
        x[act[move]] = trial[move, k[move]]
        fx[act[move]] = fbest[move]
        h[act[~move]] *= 0.5
    return fx, x


def profile_mismatch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Mean squared difference of every profile pair.

    ``a`` has shape (P, T, M) and ``b`` shape (Q, T, M); NaN marks invalid
    samples. Returns (P, T, Q) with ``out[p, t, q]`` the mean of
    ``(a[p, t] - b[q, t])**2`` over jointly valid samples, inf if there are none.
    """
    ma, mb = np.isfinite(a), np.isfinite(b)
    a0, b0 = np.where(ma, a, 0.0), np.where(mb, b, 0.0)
    ma, mb = ma.astype(float), mb.astype(float)

    def cross(x, y):  # sum_m x[p,t,m] y[q,t,m] -> (P, T, Q)
        return np.matmul(x.transpose(1, 0, 2), y.transpose(1, 2, 0)).transpose(1, 0, 2)

    n = cross(ma, mb)
    ss = cross(a0 * a0, mb) - 2.0 * cross(a0, b0) + cross(ma, b0 * b0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0.5, np.maximum(ss, 0.0) / n, np.inf)


def euler_axes(shape=COARSE_SHAPE):
    """Axes of the cell-centered Euler grid: phi, psi in [0, 2 pi), theta in (0, pi)."""
    n_phi, n_theta, n_psi = shape
    return (2 * np.pi * np.arange(n_phi) / n_phi, np.pi * (np.arange(n_theta) + 0.5) / n_theta,
            2 * np.pi * np.arange(n_psi) / n_psi)


def energy_grid(nu_s: NuFrame, nu_t: NuFrame, shape=FINE_SHAPE, n_beta: int = GRID_BETAS) -> np.ndarray:
    """Energy on the full Euler grid of ``shape``, as an array over (phi, theta, psi).

    For fixed theta the s-arcs depend only on phi and the t-arcs only on
    psi, so the arc profiles of each frame are sampled once and all
    combinations are compared with matrix products.
    """
    if nu_s.grid != nu_t.grid:
        raise ValueError("frames live on different grids")
    k0 = nu_s.grid.k0
    phis, thetas, psis = euler_axes(shape)
    b = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n_beta)[None, None, :]
    th = thetas[None, :, None]
    ph, ps = phis[:, None, None], (np.pi - psis)[:, None, None]
    prof_s = np.concatenate([nu_s(gamma_euler(ph, th, b, k0)), nu_s(gamma_dual_euler(ph, th, b, k0))], axis=-1)
    prof_t = np.concatenate([nu_t(gamma_euler(ps, th, -b, k0)), nu_t(gamma_dual_euler(ps, th, b, k0))], axis=-1)
    return profile_mismatch(prof_s, prof_t)


def coarse_euler_grid(shape=COARSE_SHAPE) -> list:
    """Cell-centered grid over phi, psi in [0, 2 pi) and theta in (0, pi), row-major."""
    phis, thetas, psis = euler_axes(shape)
    return [EulerZYZ(*p) for p in itertools.product(phis, thetas, psis)]


def grid_ranking(nu_s: NuFrame, nu_t: NuFrame, euler_grid) -> list:
    """All grid evaluations sorted by energy (stable, so ties keep grid order)."""
    evals = [energy(nu_s, nu_t, e) for e in euler_grid]
    if not evals:
        raise ValueError("empty Euler grid")
    return sorted(evals, key=lambda ev: ev.energy)


def grid_search(nu_s: NuFrame, nu_t: NuFrame, euler_grid) -> EnergyEvaluation:
    """Grid point of least energy; ties go to the first one in the given order."""
    return grid_ranking(nu_s, nu_t, euler_grid)[0]


def nelder_mead_refine(objective: Callable, init, step: float = SIMPLEX_STEP, tol: float = NM_TOL,
                       max_iter: int = NM_MAX_ITER) -> EulerZYZ:
    """Downhill simplex from ``init`` with an axis-aligned start simplex of size ``step``.

    Raises
    ------
    OptimizationFailure
        If the objective turns non-finite; ``best`` holds the best vertex seen.
    """
    x0 = np.asarray(init, dtype=float)
    simplex = np.vstack([x0, x0 + step * np.eye(3)])
    best = [x0.copy(), np.inf]

    def wrapped(x):
        f = float(objective(x))
        if not np.isfinite(f):
            raise OptimizationFailure("objective is not finite", best[0], best[1])
        if f < best[1]:
            best[0], best[1] = x.copy(), f
        return f

    if not np.isfinite(wrapped(x0)):
        raise OptimizationFailure("objective is not finite at the start point", x0, None)
    res = minimize(wrapped, x0, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "xatol": tol, "fatol": np.inf,
                            "maxiter": max_iter, "adaptive": False})
    x = res.x if res.fun <= best[1] else best[0]
    return rotation_to_euler(euler_to_rotation(x))


def grid_local_minima(values, shape, wrap) -> np.ndarray:
    """Flat indices of the points of a 3-D grid that are no larger than any
    of their 26 neighbors, sorted by value. ``wrap`` flags periodic axes."""
    v = np.asarray(values, dtype=float).reshape(shape)
    mode = ["wrap" if w else "nearest" for w in wrap]
    idx = np.flatnonzero(v == minimum_filter(v, size=3, mode=mode))
    return idx[np.argsort(v.ravel()[idx], kind="stable")]


def _energy_objective(nu_s: NuFrame, nu_t: NuFrame) -> Callable:
    def f(x):
        try:
            return energy(nu_s, nu_t, x).energy
        except EmptySupportError:
            return np.inf
    return f


def degenerate_rotation(alpha: float, reflected: bool) -> np.ndarray:
    Q = axis_rotation_z(alpha)
    return axis_rotation_y(np.pi) @ Q if reflected else Q


def _refine(obj, init) -> EulerZYZ:
    try:
        return nelder_mead_refine(obj, init)
    except OptimizationFailure as exc:
        if exc.best is None:
            raise
        return rotation_to_euler(euler_to_rotation(exc.best))


def estimate_relative_euler(nu_s: NuFrame, nu_t: NuFrame, init=None, shape=FINE_SHAPE,
                            n_screen: int = N_SCREEN, n_final: int = N_FINAL) -> EulerZYZ:
    """Euler triple of ``Rs^T Rt`` minimizing the energy.

    With ``init`` a single refinement is run. Otherwise the energy is
    evaluated on the full grid of ``shape``, a low-resolution pattern
    search starts from its ``n_screen`` lowest local minima and the
    ``n_final`` best outcomes are fully refined. Spurious minima near
    half-turns of the truth come close to the true one in grid value, so
    the true basin is often not the lowest grid minimum.
    """
    obj = _energy_objective(nu_s, nu_t)
    if init is not None:
        return _refine(obj, init)
    values = energy_grid(nu_s, nu_t, shape)
    axes = euler_axes(shape)
    minima = grid_local_minima(values, shape, wrap=(True, False, True))[:n_screen]
    starts = [[ax[i] for ax, i in zip(axes, np.unravel_index(j, shape))] for j in minima]

    # search in the charts v -> R0 exp(hat(v)) around each start, free of the gimbal
    R0 = Rotation.from_euler("ZYZ", starts).as_matrix()

    def local(v, owner):
        return euler_angles(R0[owner] @ Rotation.from_rotvec(v).as_matrix())

    fx, v = compass_search(lambda v, owner: energy_batch(nu_s, nu_t, local(v, owner), GRID_BETAS),
                           np.zeros((len(R0), 3)), step=0.5 * (axes[1][1] - axes[1][0]))
    e = local(v, np.arange(len(v)))
    results = [_refine(obj, e[i]) for i in np.argsort(fx, kind="stable")[:n_final]]
    return min(results, key=obj)


def estimate_rotation_direct(nu_ref: NuFrame, nu_t: NuFrame, init=None, check_degenerate: bool = True) -> np.ndarray:
    """Estimate ``R_ref^T R_t`` from two frames.

    ``init`` may be an Euler triple or a rotation matrix. Degenerate pairs
    (rotation axis of the pair along e3, possibly reflected) are detected
    first and answered in closed form.
    """
    if check_degenerate:
        match = detect_degenerate(nu_ref, nu_t)
        if match is not None:
            return degenerate_rotation(match.alpha, match.reflected)
    if init is not None and np.shape(init) == (3, 3):
        init = rotation_to_euler(init)
    return euler_to_rotation(estimate_relative_euler(nu_ref, nu_t, init))
