"""Stereographic chart of the data disk, in which the elliptic common arcs
become straight lines, and a rotation estimator working on those lines."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .direct import N_FINAL, N_SCREEN, compass_search, grid_local_minima, mean_square_rows, profile_mismatch
from .errors import DegenerateInputError, EmptySupportError, OutOfDiskError
from .forward import DEFAULT_K0, NuFrame, PolarGrid, kappa
from .so3 import AngularVelocity, axis_rotation_y, axis_rotation_z

GRID_SHAPE = (64, 128, 128)
GRID_SAMPLES = 33
# keeps theta inside [0.02, pi - 0.02]
MAX_LOG_OFFSET = float(-np.log(np.tan(0.01)))


def tau(k, k0: float = DEFAULT_K0) -> np.ndarray:
    """``k0 k / (k0 - kappa(k))`` for ``0 < |k| < k0``."""
    k = np.asarray(k, dtype=float)
    r2 = np.sum(k * k, axis=-1)
    if np.any(r2 == 0.0):
        raise OutOfDiskError("tau is undefined at the origin")
    kap = kappa(k, k0)
    # k0 - kappa = r^2 / (k0 + kappa) avoids cancellation for small r
    return k * (k0 * (k0 + kap) / r2)[..., None]


def tau_inv(y, k0: float = DEFAULT_K0) -> np.ndarray:
    """``2 k0^2 y / (k0^2 + |y|^2)`` for ``|y| > k0``."""
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    if np.any(r2 <= k0 * k0):
        raise OutOfDiskError("tau_inv needs |y| > k0")
    return y * (2.0 * k0 * k0 / (k0 * k0 + r2))[..., None]


def stereographic_projection(x, k0: float = DEFAULT_K0, R=None) -> np.ndarray:
    """``2 k0^2 x / |x|^2`` from the origin onto the plane tangent to the
    sphere ``R h(B)`` at its far pole (rotated back by ``R^T``)."""
    x = np.asarray(x, dtype=float)
    if R is not None:
        x = x @ np.asarray(R, dtype=float)
    return 2.0 * k0 * k0 * x / np.sum(x * x, axis=-1)[..., None]


def transform_nu(frame: NuFrame, y) -> np.ndarray:
    """``nu(tau^{-1}(y))``; points with ``|y| <= k0`` or outside the
    covered disk give NaN."""
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    ok = r2 > frame.grid.k0**2
    safe = np.where(ok[..., None], y, 2.0 * frame.grid.k0)
    return np.where(ok, frame(tau_inv(safe, frame.grid.k0)), np.nan)


def _unit(a: float) -> np.ndarray:
    return np.array([np.cos(a), np.sin(a)])


def _perp(w) -> np.ndarray:
    return np.array([-w[1], w[0]])


@dataclass(frozen=True)
class LinePair:
    """Image lines of the common arcs in both frames.

    Primal lines ``-b w1 + xi w2`` and dual lines ``(k0^2 / b) w1 - xi w2``
    with ``w2`` the left normal of ``w1``.
    """

    b: float
    w1_s: np.ndarray
    w1_t: np.ndarray
    k0: float = DEFAULT_K0

    def __post_init__(self):
        if not self.b > 0.0:
            raise ValueError("line offset must be positive")

    def primal(self, xi, which: str = "s") -> np.ndarray:
        w1 = self.w1_s if which == "s" else self.w1_t
        xi = np.asarray(xi, dtype=float)[..., None]
        return -self.b * w1 + xi * _perp(w1)

    def dual(self, xi, which: str = "s") -> np.ndarray:
        w1 = self.w1_s if which == "s" else self.w1_t
        xi = np.asarray(xi, dtype=float)[..., None]
        return (self.k0**2 / self.b) * w1 - xi * _perp(w1)

    @property
    def theta(self) -> float:
        return 2.0 * float(np.arctan(self.b / self.k0))

    def rotation(self) -> np.ndarray:
        """Relative rotation ``Rs^T Rt`` encoded by the line pair."""
        a_s = np.arctan2(self.w1_s[1], self.w1_s[0])
        a_t = np.arctan2(self.w1_t[1], self.w1_t[0])
        return axis_rotation_z(a_s) @ axis_rotation_y(self.theta) @ axis_rotation_z(np.pi - a_t)


def line_from_euler(phi: float, theta: float, k0: float = DEFAULT_K0, psi: float = 0.0) -> LinePair:
    """Lines belonging to the Euler triple (phi, theta, psi) of ``Rs^T Rt``."""
    if not 0.0 < theta < np.pi:
        raise DegenerateInputError("theta must lie in (0, pi)")
    return LinePair(k0 * float(np.tan(0.5 * theta)), _unit(phi), _unit(np.pi - psi), k0)


def collinearity_check(points) -> float:
    """Largest distance of the points from their total-least-squares line."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    c = p - p.mean(axis=0)
    _, _, vt = np.linalg.svd(c, full_matrices=False)
    return float(np.abs(c @ vt[1]).max())


@lru_cache(maxsize=16)
def _chart_radii(m: int, k0: float, s_max: float) -> np.ndarray:
    s = s_max * k0 * (np.arange(m) + 1.0) / m
    return tau(np.stack([s, np.zeros_like(s)], axis=-1), k0)[:, 0]


def line_parameters(offset, n: int, k0: float = DEFAULT_K0, s_max: float = 0.99) -> np.ndarray:
    """Parameters ``xi`` of points ``offset * w1 + xi * w2`` whose chart
    preimages have radii uniform in (0, s_max * k0], both signs of ``xi``,
    for an array of offsets: shape (..., 2 * (n // 2)), NaN for radii the
    line does not reach."""
    rho = _chart_radii(n // 2, float(k0), s_max)
    off = np.asarray(offset, dtype=float)[..., None]
    with np.errstate(invalid="ignore"):
        xi = np.where(rho > np.abs(off), np.sqrt(rho * rho - off * off), np.nan)
    return np.concatenate([-xi[..., ::-1], xi], axis=-1)


def line_samples(offset: float, n: int, k0: float = DEFAULT_K0, s_max: float = 0.99) -> np.ndarray:
    """Finite entries of :func:`line_parameters` for one offset."""
    xi = line_parameters(offset, n, k0, s_max)
    return xi[np.isfinite(xi)]


def line_energy(nu_s: NuFrame, nu_t: NuFrame, lines: LinePair, n: int) -> tuple[float, int]:
    """Mean squared mismatch of the transformed data along both line pairs.

    Primal profiles are compared in opposite orientation, dual profiles in
    the same orientation. Samples outside the chart are skipped.
    """
    xi = line_samples(lines.b, n, lines.k0)
    xi_d = line_samples(lines.k0**2 / lines.b, n, lines.k0)
    ys = np.concatenate([lines.primal(xi, "s"), lines.dual(xi_d, "s")])
    yt = np.concatenate([lines.primal(-xi, "t"), lines.dual(xi_d, "t")])
    diff = transform_nu(nu_s, ys) - transform_nu(nu_t, yt)
    ok = np.isfinite(diff)
    if not ok.any():
        raise EmptySupportError("no line sample inside the chart")
    return float(np.mean(diff[ok] ** 2)), int(ok.sum())


def _lines(x, k0) -> LinePair:
    log_b, a_s, a_t = x
    return LinePair(float(k0 * np.exp(log_b)), _unit(a_s), _unit(a_t), k0)


def _line_points(b, a_s, a_t, xi, xi_d, k0):
    """Chart points of the s- and t-profiles; arrays broadcast against the
    sample axis (last axis before the coordinates)."""
    def pts(a, sign):
        w1 = np.stack([np.cos(a), np.sin(a)], axis=-1)[..., None, :]
        w2 = np.stack([-np.sin(a), np.cos(a)], axis=-1)[..., None, :]
        off = b[..., None, None]
        return np.concatenate([-off * w1 + sign * xi[..., None] * w2,
                               (k0 * k0 / off) * w1 - xi_d[..., None] * w2], axis=-2)
    return pts(a_s, 1.0), pts(a_t, -1.0)


def line_energy_batch(nu_s: NuFrame, nu_t: NuFrame, x, n: int) -> np.ndarray:
    """:func:`line_energy` for the rows ``(log(b / k0), arg w1_s, arg w1_t)``
    of ``x``; inf where the offset bound is exceeded or no sample is valid."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k0 = nu_s.grid.k0
    bounded = np.abs(x[:, 0]) <= MAX_LOG_OFFSET
    b = k0 * np.exp(np.clip(x[:, 0], -MAX_LOG_OFFSET, MAX_LOG_OFFSET))
    ys, yt = _line_points(b, x[:, 1], x[:, 2], line_parameters(b, n, k0), line_parameters(k0 * k0 / b, n, k0), k0)
    return np.where(bounded, mean_square_rows(transform_nu(nu_s, ys) - transform_nu(nu_t, yt)), np.inf)


def line_energy_grid(nu_s: NuFrame, nu_t: NuFrame, shape=GRID_SHAPE, n: int = GRID_SAMPLES) -> np.ndarray:
    """Line energy over a grid of (theta, arg w1_s, arg w1_t) with
    ``b = k0 tan(theta / 2)``, as an array in that axis order.

    s-profiles depend only on (b, w1_s) and t-profiles only on (b, w1_t),
    so each frame is sampled once and all pairs compared by matrix products.
    """
    k0 = nu_s.grid.k0
    n_b, n_s, n_t = shape
    thetas = np.pi * (np.arange(n_b) + 0.5) / n_b
    bs = k0 * np.tan(0.5 * thetas)
    xi, xi_d = line_parameters(bs, n, k0), line_parameters(k0 * k0 / bs, n, k0)
    # profiles indexed (angle, theta, sample)
    a_s = np.broadcast_to((2 * np.pi * np.arange(n_s) / n_s)[:, None], (n_s, n_b))
    a_t = np.broadcast_to((2 * np.pi * np.arange(n_t) / n_t)[:, None], (n_t, n_b))
    ys, _ = _line_points(np.broadcast_to(bs, (n_s, n_b)), a_s, a_s, xi, xi_d, k0)
    _, yt = _line_points(np.broadcast_to(bs, (n_t, n_b)), a_t, a_t, xi, xi_d, k0)
    return profile_mismatch(transform_nu(nu_s, ys), transform_nu(nu_t, yt)).transpose(1, 0, 2)


def estimate_lines(nu_s: NuFrame, nu_t: NuFrame, shape=GRID_SHAPE, n_screen: int = N_SCREEN,
                   n_final: int = N_FINAL) -> LinePair:
    """Line pair minimizing :func:`line_energy`.

    The search runs over ``(log(b / k0), arg w1_s, arg w1_t)``: the full
    grid of :func:`line_energy_grid`, a low-resolution pattern search from
    its lowest local minima and full refinement of the best outcomes.
    """
    grid = nu_s.grid
    if grid != nu_t.grid:
        raise ValueError("frames live on different grids")
    k0 = grid.k0
    n_full = 2 * grid.N + 1

    def objective(x, n):
        if abs(x[0]) > MAX_LOG_OFFSET:
            return np.inf
        try:
            return line_energy(nu_s, nu_t, _lines(x, k0), n)[0]
        except (EmptySupportError, ValueError):
            return np.inf

    values = line_energy_grid(nu_s, nu_t, shape)
    n_b, n_s, n_t = shape
    minima = grid_local_minima(values, shape, wrap=(False, True, True))[:n_screen]
    i, j, m = np.unravel_index(minima, shape)
    starts = np.stack([np.log(np.tan(0.5 * np.pi * (i + 0.5) / n_b)), 2 * np.pi * j / n_s, 2 * np.pi * m / n_t], axis=-1)
    fx, x = compass_search(lambda x, owner: line_energy_batch(nu_s, nu_t, x, GRID_SAMPLES), starts,
                           step=np.pi / n_s)
    full = lambda x: objective(x, n_full)
    best = min((_refine_lines(full, x[k]) for k in np.argsort(fx, kind="stable")[:n_final]), key=full)
    return _lines(best, k0)


def _refine_lines(obj, x0) -> np.ndarray:
    res = minimize(obj, x0, method="Nelder-Mead",
                   options={"initial_simplex": np.vstack([x0, x0 + 0.05 * np.eye(3)]),
                            "xatol": 1e-8, "fatol": np.inf, "maxiter": 200})
    return res.x


def estimate_rotation_stereo(nu_s: NuFrame, nu_t: NuFrame) -> np.ndarray:
    """Relative rotation ``Rs^T Rt`` from the best matching line pair."""
    return estimate_lines(nu_s, nu_t).rotation()


# --- infinitesimal relation in the chart ---------------------------------


def stereo_coefficient(r, omega: AngularVelocity, k0: float = DEFAULT_K0):
    """Factor ``k0 rho + r zeta`` multiplying the tangential derivative."""
    return k0 * omega.rho + np.asarray(r, dtype=float) * omega.zeta


def check_inf_relation_stereo(dtnu: np.ndarray, dphinu: np.ndarray, grid: PolarGrid,
                              omega: AngularVelocity) -> float:
    """Relative residual of ``d_t nu~ = (k0 rho + r zeta) (1/r) d_phi nu~`` on
    the chart line through ``omega``'s angle (which must be a grid angle)."""
    ell = omega.phi / grid.dphi
    if abs(ell - round(ell)) > 1e-9:
        raise ValueError("omega.phi must be a grid angle")
    ell = int(round(ell))
    s = grid.radii
    keep = np.abs(s) <= 0.995 * grid.k0
    s = s[keep]
    r = tau(np.stack([s, np.zeros_like(s)], axis=-1), grid.k0)[:, 0]  # signed chart radius
    lhs = np.asarray(dtnu)[keep, ell]
    rhs = stereo_coefficient(r, omega, grid.k0) * np.asarray(dphinu)[keep, ell] / r
    scale = np.abs(lhs).max()
    if scale == 0.0:
        return float(np.abs(rhs).max())
    return float(np.abs(lhs - rhs).max() / scale)
