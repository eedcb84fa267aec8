"""Common circular arcs of two hemispheres and their elliptic preimages in the data disk.

For rotations ``Rs``, ``Rt`` the hemispheres ``Rs h(B)`` and ``Rt h(B)``
meet in a circular arc ``sigma``; the dual arc ``sigma*`` is the meeting
of ``Rs h(B)`` with the reflected ``-Rt h(B)``. ``gamma`` and ``gamma*``
are their preimages under ``Rs h``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import AmbiguityError, DegenerateInputError
from .forward import DEFAULT_K0, NuFrame, PolarGrid

E3 = np.array([0.0, 0.0, 1.0])
DEGENERATE_ANGLE = 1e-6
TOL_DEGENERATE = 1e-3


@dataclass(frozen=True)
class ArcBasis:
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    a: float
    a_tilde: float
    a_star: float
    c: float  # <Rs e3, Rt e3>


@dataclass(frozen=True)
class ArcInterval:
    kind: str  # "full" or "capped"
    beta_max: float = np.pi

    def contains(self, beta) -> np.ndarray:
        b = np.asarray(beta, dtype=float)
        if self.kind == "full":
            return (b > -np.pi) & (b <= np.pi)
        return np.abs(b) < self.beta_max


def axis_angle_between(Rs, Rt) -> float:
    u = np.asarray(Rs)[:, 2]
    v = np.asarray(Rt)[:, 2]
    return float(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)))


def is_degenerate_pair(Rs, Rt, tol: float = DEGENERATE_ANGLE) -> bool:
    ang = axis_angle_between(Rs, Rt)
    return ang < tol or ang > np.pi - tol


def _check_pair(Rs, Rt):
    if is_degenerate_pair(Rs, Rt):
        raise DegenerateInputError("Rs e3 and Rt e3 are (anti)parallel")


def arc_basis(Rs, Rt, k0: float = DEFAULT_K0) -> ArcBasis:
    Rs = np.asarray(Rs, dtype=float)
    Rt = np.asarray(Rt, dtype=float)
    _check_pair(Rs, Rt)
    u, v = Rs[:, 2], Rt[:, 2]
    s, d, x = u + v, u - v, np.cross(u, v)
    rel = Rs.T @ v  # Rs^T Rt e3
    p_rel = rel[:2]
    p_cross = np.cross(E3, rel)[:2]
    return ArcBasis(
        v1=s / np.linalg.norm(s),
        v2=x / np.linalg.norm(x),
        v3=d / np.linalg.norm(d),
        w1=p_rel / np.linalg.norm(p_rel),
        w2=p_cross / np.linalg.norm(p_cross),
        a=0.5 * k0 * float(np.linalg.norm(s)),
        a_tilde=0.5 * k0 * float(np.linalg.norm(p_rel)),
        a_star=0.5 * k0 * float(np.linalg.norm(d)),
        c=float(np.dot(u, v)),
    )


def interval_from_cos(c: float, dual: bool = False) -> ArcInterval:
    if dual:
        c = -c
    if c <= 0.0:
        return ArcInterval("full")
    beta_max = float(np.arccos((c - 1.0) / (c + 1.0)))
    # for tiny c the cap rounds to pi, i.e. the whole circle
    return ArcInterval("capped", beta_max) if beta_max < np.pi else ArcInterval("full")


def interval_J(Rs, Rt) -> ArcInterval:
    _check_pair(Rs, Rt)
    return interval_from_cos(float(np.dot(np.asarray(Rs)[:, 2], np.asarray(Rt)[:, 2])))


def interval_J_dual(Rs, Rt) -> ArcInterval:
    _check_pair(Rs, Rt)
    return interval_from_cos(float(np.dot(np.asarray(Rs)[:, 2], np.asarray(Rt)[:, 2])), dual=True)


def _betas(beta, interval: ArcInterval):
    b = np.asarray(beta, dtype=float)
    if not np.all(interval.contains(b)):
        raise ValueError("beta outside the arc parameter interval")
    return b[..., None]


def sigma(Rs, Rt, beta, k0: float = DEFAULT_K0) -> np.ndarray:
    B = arc_basis(Rs, Rt, k0)
    b = _betas(beta, interval_from_cos(B.c))
    return B.a * (np.cos(b) - 1.0) * B.v1 + B.a * np.sin(b) * B.v2


def sigma_dual(Rs, Rt, beta, k0: float = DEFAULT_K0) -> np.ndarray:
    B = arc_basis(Rs, Rt, k0)
    b = _betas(beta, interval_from_cos(B.c, dual=True))
    return B.a_star * (np.cos(b) - 1.0) * B.v3 - B.a_star * np.sin(b) * B.v2


def gamma(Rs, Rt, beta, k0: float = DEFAULT_K0) -> np.ndarray:
    """Elliptic arc in the s-disk with ``Rs h(gamma(beta)) = sigma(beta)``."""
    B = arc_basis(Rs, Rt, k0)
    b = _betas(beta, interval_from_cos(B.c))
    return B.a_tilde * (np.cos(b) - 1.0) * B.w1 + B.a * np.sin(b) * B.w2


def gamma_dual(Rs, Rt, beta, k0: float = DEFAULT_K0) -> np.ndarray:
    B = arc_basis(Rs, Rt, k0)
    b = _betas(beta, interval_from_cos(B.c, dual=True))
    return -B.a_tilde * (np.cos(b) - 1.0) * B.w1 - B.a_star * np.sin(b) * B.w2


def _ellipse(phi, u, v) -> np.ndarray:
    """``u (cos phi, sin phi) + v (-sin phi, cos phi)``, broadcasting."""
    c, s = np.cos(phi), np.sin(phi)
    return np.stack([u * c - v * s, u * s + v * c], axis=-1)


def gamma_euler(phi, theta, beta, k0: float = DEFAULT_K0) -> np.ndarray:
    """Elliptic arc written with the Euler angles (phi, theta, .) of ``Rs^T Rt``.

    Array arguments broadcast; the point coordinates form the last axis.
    """
    b = np.asarray(beta, dtype=float)
    return _ellipse(phi, 0.5 * k0 * np.sin(theta) * (np.cos(b) - 1.0), k0 * np.cos(0.5 * theta) * np.sin(b))


def gamma_dual_euler(phi, theta, beta, k0: float = DEFAULT_K0) -> np.ndarray:
    b = np.asarray(beta, dtype=float)
    return _ellipse(phi, -0.5 * k0 * np.sin(theta) * (np.cos(b) - 1.0), -k0 * np.sin(0.5 * theta) * np.sin(b))


def beta_grid(N: int) -> np.ndarray:
    """``2N + 1`` uniform nodes on [-pi/2, pi/2]."""
    return np.linspace(-0.5 * np.pi, 0.5 * np.pi, 2 * N + 1)


# --- degenerate pairs Rs e3 = +-Rt e3 ------------------------------------


def node_map(grid: PolarGrid, steps: int, reflect: bool = False):
    """Index arrays ``(I, L)`` with ``values[I, L]`` the data at the node
    obtained by rotating each node by ``steps * dphi`` (after reflecting
    ``k2 -> -k2`` first if ``reflect``)."""
    n = 2 * grid.N
    i = np.arange(n)[:, None]
    ell = np.arange(n)[None, :]
    target = (-ell if reflect else ell) + steps
    target = np.mod(target, 2 * n)
    flip = target >= n
    I = np.where(flip, n - 1 - i, i)
    L = np.where(flip, target - n, target)
    return np.broadcast_to(I, (n, n)), L


class DegenerateMatch(NamedTuple):
    alpha: float
    reflected: bool
    rms: float


def _rms(x) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def _refine_alpha(nu_s: NuFrame, nu_t: NuFrame, alpha0: float, reflected: bool) -> tuple[float, float]:
    grid = nu_s.grid
    inner = np.abs(grid.radii) <= 0.9 * grid.k0
    pts = grid.points[inner].reshape(-1, 2)
    target = nu_t.values[inner].ravel()

    def mismatch(alpha):
        c, s = np.cos(alpha), np.sin(alpha)
        x = c * pts[:, 0] - s * pts[:, 1]
        y = s * pts[:, 0] + c * pts[:, 1]
        if reflected:
            y = -y
        vals = nu_s(np.stack([x, y], axis=-1))
        return _rms(vals - target)

    res = minimize_scalar(mismatch, bounds=(alpha0 - grid.dphi, alpha0 + grid.dphi), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x) % (2 * np.pi), float(res.fun)


def detect_degenerate(nu_s: NuFrame, nu_t: NuFrame, tol: float = TOL_DEGENERATE) -> Optional[DegenerateMatch]:
    """Look for ``alpha`` with ``nu_s(Q(alpha) k) = nu_t(k)`` or
    ``nu_s(S Q(alpha) k) = nu_t(k)`` for all ``k``.

    On-grid rotations are scanned exactly by node permutation; the best
    candidate is then refined off-grid with the spline. A match needs an
    RMS mismatch below ``tol`` times the RMS of ``nu_t``.

    Raises
    ------
    AmbiguityError
        If both the plain and the reflected branch match.
    """
    grid = nu_s.grid
    if grid != nu_t.grid:
        raise ValueError("frames live on different grids")
    threshold = tol * _rms(nu_t.values)
    nsteps = 4 * grid.N
    best = {}
    for reflected in (False, True):
        errs = np.empty(nsteps)
        for m in range(nsteps):
            # plain: node at Q(alpha) k; reflected: node at S Q(alpha) k
            I, L = node_map(grid, -m if reflected else m, reflected)
            errs[m] = _rms(nu_s.values[I, L] - nu_t.values)
        m = int(np.argmin(errs))
        alpha, err = m * grid.dphi, errs[m]
        if 1e-9 * threshold < err < 100.0 * threshold:
            alpha, err = _refine_alpha(nu_s, nu_t, alpha, reflected)
        best[reflected] = DegenerateMatch(alpha, reflected, err)
    hits = [b for b in best.values() if b.rms < threshold]
    if len(hits) == 2:
        raise AmbiguityError("data match both degenerate branches; the object looks symmetric")
    return hits[0] if hits else None
