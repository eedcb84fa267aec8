"""Angular velocity from first derivatives of the squared energy, and rotation
trajectories by integrating it on SO(3)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import AmbiguityError, RankDeficiencyError
from .forward import NuFrame, PolarGrid, nu_at
from .interp import COVER_FRACTION, wrap_extend
from .so3 import AngularVelocity, integrate_rotation, rodrigues_exp

R_MIN = 1e-9
AMBIGUITY_RATIO = 0.5


@dataclass(frozen=True, eq=False)
class GpqProfile:
    """Coefficient profiles along the line through 0 at angle ``phi``."""

    phi: float
    g: np.ndarray
    p: np.ndarray
    q: np.ndarray


@dataclass(frozen=True, eq=False)
class PhiScan:
    phis: np.ndarray
    j_values: np.ndarray  # inf where the 2x2 system is singular
    rho_hat: np.ndarray
    zeta_hat: np.ndarray
    second_minimum: Optional[int] = None

    @property
    def best(self) -> int:
        return int(np.argmin(self.j_values))  # first occurrence = smallest phi

    @property
    def j_min(self) -> float:
        return float(self.j_values[self.best])

    @property
    def ambiguous(self) -> bool:
        if self.second_minimum is None:
            return False
        j2 = self.j_values[self.second_minimum]
        return j2 > 0.0 and self.j_min / j2 > AMBIGUITY_RATIO

    def omega(self) -> AngularVelocity:
        i = self.best
        return AngularVelocity(float(self.rho_hat[i]), float(self.phis[i]), float(self.zeta_hat[i]))


def dt_nu(prev: NuFrame, cur: NuFrame, nxt: NuFrame) -> np.ndarray:
    """Central difference in time at ``cur``."""
    if not (prev.grid == cur.grid == nxt.grid):
        raise ValueError("frames live on different grids")
    dt = nxt.time - prev.time
    if dt <= 0.0:
        raise ValueError("frames must be ordered in time")
    return (nxt.values - prev.values) / dt


def dt_nu_stack(values: np.ndarray, times) -> np.ndarray:
    """Time derivative of a ``(T, 2N, 2N)`` stack: central inside, one-sided at the ends."""
    t = np.asarray(times, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two time samples")
    return np.gradient(np.asarray(values, dtype=float), t, axis=0, edge_order=1)


def dphi_nu(frame: NuFrame) -> np.ndarray:
    """Central difference in the angle index, closed across phi = pi by the
    signed-radius wrap."""
    grid = frame.grid
    _, ext = wrap_extend(grid, frame.values, 1)
    return (ext[:, 2:] - ext[:, :-2]) / (2.0 * grid.dphi)


def effective_radii(grid: PolarGrid) -> np.ndarray:
    r = np.abs(grid.radii)
    return (r <= COVER_FRACTION * grid.k0) & (r >= R_MIN)


def p_factor(radii, k0: float) -> np.ndarray:
    """``(k0 - kappa(r)) / r`` with the value 0 at r = 0."""
    r = np.asarray(radii, dtype=float)
    out = np.zeros_like(r)
    nz = np.abs(r) >= R_MIN
    rn = r[nz]
    # (k0 - sqrt(k0^2 - r^2)) / r = r / (k0 + sqrt(k0^2 - r^2))
    out[nz] = rn / (k0 + np.sqrt(k0 * k0 - rn * rn))
    return out


def gpq(dtnu: np.ndarray, dphinu: np.ndarray, grid: PolarGrid, phi_index: int) -> GpqProfile:
    mask = effective_radii(grid)
    r = grid.radii[mask]
    g = np.asarray(dtnu)[mask, phi_index]
    q = np.asarray(dphinu)[mask, phi_index]
    return GpqProfile(float(grid.angles[phi_index]), g, p_factor(r, grid.k0) * q, q)


def solve_rho_zeta(profile: GpqProfile) -> tuple[float, float, float]:
    """Least-squares fit ``g ~ rho p + zeta q``; returns (rho, zeta, squared residual)."""
    p, q, g = profile.p, profile.q, profile.g
    npn, nqn = np.linalg.norm(p), np.linalg.norm(q)
    pq = float(p @ q)
    if not npn * nqn - abs(pq) > 1e-12 * npn * nqn:
        raise RankDeficiencyError("p and q are linearly dependent")
    A = np.array([[p @ p, pq], [pq, q @ q]])
    rho, zeta = np.linalg.solve(A, [p @ g, q @ g])
    res = g - rho * p - zeta * q
    return float(rho), float(zeta), float(res @ res)


def _second_minimum(j: np.ndarray, best: int, min_sep: int = 2) -> Optional[int]:
    """Smallest local minimum of the pi-periodic profile ``j`` at least
    ``min_sep`` indices away from ``best``."""
    n = len(j)
    left, right = np.roll(j, 1), np.roll(j, -1)
    cand = [i for i in range(n) if np.isfinite(j[i]) and j[i] <= left[i] and j[i] <= right[i]]
    far = [i for i in cand if min(abs(i - best), n - abs(i - best)) > min_sep]
    if not far:
        return None
    return min(far, key=lambda i: j[i])


def scan_phi(dtnu: np.ndarray, dphinu: np.ndarray, grid: PolarGrid) -> PhiScan:
    """Evaluate the residual j(phi) at every grid angle.

    Raises
    ------
    AmbiguityError
        If the 2x2 system is singular at every angle.
    """
    if effective_radii(grid).sum() < 2:
        raise ValueError("need at least two effective radii")
    n = len(grid.angles)
    j = np.full(n, np.inf)
    rho = np.full(n, np.nan)
    zeta = np.full(n, np.nan)
    for ell in range(n):
        try:
            rho[ell], zeta[ell], j[ell] = solve_rho_zeta(gpq(dtnu, dphinu, grid, ell))
        except RankDeficiencyError:
            continue
    if not np.any(np.isfinite(j)):
        raise AmbiguityError("no angle gives a solvable system")
    best = int(np.argmin(j))
    return PhiScan(grid.angles.copy(), j, rho, zeta, _second_minimum(j, best))


def estimate_omega(dtnu: np.ndarray, frame: NuFrame, strict: bool = False) -> tuple[AngularVelocity, PhiScan]:
    """Angular velocity at the time of ``frame`` from its time derivative ``dtnu``.

    With ``strict`` an ambiguous scan (two separated minima of similar
    depth) raises :class:`AmbiguityError`.
    """
    scan = scan_phi(dtnu, dphi_nu(frame), frame.grid)
    if strict and scan.ambiguous:
        raise AmbiguityError(
            f"residual minima at phi={scan.phis[scan.best]:.4f} and "
            f"phi={scan.phis[scan.second_minimum]:.4f} are of similar depth"
        )
    return scan.omega(), scan


@dataclass(frozen=True, eq=False)
class InfinitesimalResult:
    rotations: np.ndarray  # (T, 3, 3)
    omegas: list  # AngularVelocity per time step
    scans: list


def estimate_rotations_infinitesimal(frames: Sequence[NuFrame], retraction: str = "cayley",
                                     strict: bool = False, skip_unsolvable: bool = False) -> InfinitesimalResult:
    """Angular velocity at every frame, integrated from ``R = I`` at the first frame.

    With ``skip_unsolvable`` a frame whose scan raises :class:`AmbiguityError`
    gets zero angular velocity and ``None`` in ``scans`` instead of aborting.
    """
    if len(frames) < 3:
        raise ValueError("need at least three time samples")
    grid = frames[0].grid
    if any(f.grid != grid for f in frames):
        raise ValueError("frames live on different grids")
    times = np.array([f.time for f in frames])
    dts = dt_nu_stack(np.stack([f.values for f in frames]), times)
    omegas, scans = [], []
    for k, fr in enumerate(frames):
        try:
            w, scan = estimate_omega(dts[k], fr, strict)
        except AmbiguityError:
            if not skip_unsolvable:
                raise
            w, scan = AngularVelocity(0.0, 0.0, 0.0), None
        omegas.append(w)
        scans.append(scan)
    rots = integrate_rotation(times, [w.cartesian for w in omegas], retraction)
    return InfinitesimalResult(rots, omegas, scans)


# --- exact derivatives for testing the linear relation ---------------------

# central-difference step near the cube root of machine epsilon, balancing
# O(eps^2) truncation against rounding in nu of order 10
DIFF_STEP = 1e-5


def analytic_dt_nu(ph, R, omega, grid: PolarGrid, eps: float = DIFF_STEP) -> np.ndarray:
    """Symmetric difference of the exact model along ``R exp(+-eps hat(omega))``."""
    w = omega.cartesian if isinstance(omega, AngularVelocity) else np.asarray(omega, dtype=float)
    nrm = np.linalg.norm(w)
    if nrm == 0.0:
        return np.zeros(grid.shape)
    plus = np.asarray(R) @ rodrigues_exp(w / nrm, eps * nrm)
    minus = np.asarray(R) @ rodrigues_exp(w / nrm, -eps * nrm)
    pts = grid.points
    return (nu_at(ph, plus, pts, grid.k0) - nu_at(ph, minus, pts, grid.k0)) / (2.0 * eps)


def analytic_dphi_nu(ph, R, grid: PolarGrid, eps: float = DIFF_STEP) -> np.ndarray:
    """Symmetric difference of the exact model in the polar angle."""
    r = grid.radii[:, None]
    out = []
    for sgn in (1.0, -1.0):
        a = grid.angles[None, :] + sgn * eps
        pts = np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)
        out.append(nu_at(ph, R, pts, grid.k0))
    return (out[0] - out[1]) / (2.0 * eps)

