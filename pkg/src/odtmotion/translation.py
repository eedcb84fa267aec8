"""Translation recovery from phase shifts of the complex data, and the optical center.

Along a common arc the ratio of the two measurements is a pure phase
``exp(i <Rt d_t - Rs d_s, sigma>)``. Unwrapping it from the arc's center
gives linear equations for ``x = Rt d_t - Rs d_s``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arcs import beta_grid, gamma, gamma_dual, is_degenerate_pair, node_map, sigma, sigma_dual
from .errors import InsufficientAmplitudeError, RankDeficiencyError
from .forward import MuFrame, h_map
from .so3 import axis_rotation_y

AMPLITUDE_FLOOR = 1e-6
RANK_TOL = 1e-8
ON_GRID_TOL = 1e-9
# arc samples beyond this fraction of k0 are dropped: near the equator the
# spline of mu degrades (kappa has a square-root singularity there)
TRUST_FRACTION = 0.9


@dataclass(frozen=True, eq=False)
class PhaseSystem:
    directions: np.ndarray  # (m, 3)
    rhs: np.ndarray  # (m,)
    source: str  # "primal", "dual" or "degenerate"

    def __len__(self):
        return len(self.rhs)


def _wrap(x):
    return np.angle(np.exp(1j * np.asarray(x, dtype=float)))


def phase_unwrap(values, anchor: int = 0) -> np.ndarray:
    """Unwrap a phase sequence outward from ``anchor`` in both directions.

    The anchor value is first reduced to (-pi, pi]; every later value is
    moved by a multiple of 2 pi so that neighbors differ by at most pi.
    """
    v = np.asarray(values, dtype=float).copy()
    if v.size == 0:
        return v
    v[anchor] = _wrap(v[anchor])
    out = np.empty_like(v)
    out[anchor:] = np.unwrap(v[anchor:])
    out[: anchor + 1] = np.unwrap(v[anchor::-1])[::-1]
    return out


def _floor(mu: MuFrame, rel: float) -> float:
    return rel * float(np.abs(mu.values).max())


def central_run(ok: np.ndarray, anchor: int) -> slice:
    """Largest run of True entries containing ``anchor``."""
    if not ok[anchor]:
        raise InsufficientAmplitudeError("amplitude below the floor at the arc center")
    lo = anchor
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = anchor
    while hi < len(ok) - 1 and ok[hi + 1]:
        hi += 1
    return slice(lo, hi + 1)


def _arc_system(num, den, directions, floor_s, floor_t, source, inside) -> PhaseSystem:
    ok = inside & np.isfinite(num) & np.isfinite(den) & (np.abs(num) > floor_s) & (np.abs(den) > floor_t)
    anchor = len(num) // 2
    run = central_run(ok, anchor)
    ratio = num[run] / den[run]
    phase = phase_unwrap(np.angle(ratio), anchor - run.start)
    return PhaseSystem(directions[run], phase, source)


def build_phase_system(mu_s: MuFrame, mu_t: MuFrame, Rs, Rt, floor: float = AMPLITUDE_FLOOR,
                       betas=None, trust: float = TRUST_FRACTION) -> tuple[PhaseSystem, PhaseSystem]:
    """Primal and dual phase equations for ``Rt d_t - Rs d_s``.

    ``mu_s`` and ``mu_t`` are anything with ``grid``, node ``values`` and a
    ``__call__`` evaluating at disk points (a :class:`MuFrame` interpolates).
    ``betas`` must be symmetric about 0 with odd length; the default is the
    uniform grid on [-pi/2, pi/2] with ``2N + 1`` nodes. Samples farther
    than ``trust * k0`` from 0 are dropped.
    """
    if mu_s.grid != mu_t.grid:
        raise ValueError("frames live on different grids")
    k0 = mu_s.grid.k0
    b = beta_grid(mu_s.grid.N) if betas is None else np.asarray(betas, dtype=float)
    fs, ft = _floor(mu_s, floor), _floor(mu_t, floor)

    rmax = trust * k0

    def inside(*pts):
        return np.all([np.linalg.norm(p, axis=-1) <= rmax for p in pts], axis=0)

    ks, kt = gamma(Rs, Rt, b, k0), gamma(Rt, Rs, -b, k0)
    primal = _arc_system(mu_s(ks), mu_t(kt), sigma(Rs, Rt, b, k0), fs, ft, "primal", inside(ks, kt))

    ks, kt = gamma_dual(Rs, Rt, b, k0), gamma_dual(Rt, Rs, b, k0)
    dual = _arc_system(mu_s(ks), np.conj(mu_t(kt)), sigma_dual(Rs, Rt, b, k0), fs, ft, "dual", inside(ks, kt))
    return primal, dual


def solve_relative_shift(systems) -> np.ndarray:
    """Minimum-norm least-squares ``x`` with ``<x, direction> = rhs`` over all rows."""
    A = np.concatenate([s.directions for s in systems])
    y = np.concatenate([s.rhs for s in systems])
    if len(y) == 0:
        raise InsufficientAmplitudeError("empty phase system")
    sv = np.linalg.svd(A, compute_uv=False)
    if len(sv) < 3 or sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficiencyError("phase directions do not span R^3")
    x, *_ = np.linalg.lstsq(A, y, rcond=None)
    return x


def solve_translation(systems, Rs, Rt, d_s=None) -> np.ndarray:
    """``d_t`` from phase systems of the pair (s, t) and the known ``d_s``."""
    d_s = np.zeros(3) if d_s is None else np.asarray(d_s, dtype=float)
    x = solve_relative_shift(systems)
    return np.asarray(Rt).T @ (x + np.asarray(Rs) @ d_s)


def estimate_translation(mu_s: MuFrame, mu_t: MuFrame, Rs, Rt, d_s=None, floor: float = AMPLITUDE_FLOOR,
                         use_dual: bool = True) -> np.ndarray:
    primal, dual = build_phase_system(mu_s, mu_t, Rs, Rt, floor)
    systems = [primal, dual] if use_dual else [primal]
    return solve_translation(systems, Rs, Rt, d_s)


def degenerate_angle(Rs, Rt) -> tuple[float, bool]:
    """``(alpha, reflected)`` with ``Rs^T Rt = Q(alpha)`` or ``Qy(pi) Q(alpha)``
    for a pair whose third columns are (anti)parallel."""
    rel = np.asarray(Rs, dtype=float).T @ np.asarray(Rt, dtype=float)
    reflected = rel[2, 2] < 0.0
    if reflected:
        rel = axis_rotation_y(np.pi).T @ rel
    return float(np.arctan2(rel[1, 0], rel[0, 0]) % (2 * np.pi)), bool(reflected)


def estimate_translation_pair(mu_s: MuFrame, mu_t: MuFrame, Rs, Rt, d_s=None,
                              floor: float = AMPLITUDE_FLOOR) -> np.ndarray:
    """:func:`estimate_translation`, switching to the whole-disk equations
    when ``Rs e3`` and ``Rt e3`` are (anti)parallel."""
    if is_degenerate_pair(Rs, Rt):
        alpha, reflected = degenerate_angle(Rs, Rt)
        system = build_degenerate_phase_system(mu_s, mu_t, Rs, Rt, alpha, reflected, floor)
        return solve_translation([system], Rs, Rt, d_s)
    return estimate_translation(mu_s, mu_t, Rs, Rt, d_s, floor)


def estimate_translations(mus, rotations, floor: float = AMPLITUDE_FLOOR, consecutive: bool = False) -> np.ndarray:
    """Translations of every frame against the first one (``R_0 = I``, ``d_0 = 0``).

    With ``consecutive`` the equations of neighboring pairs are added and
    all translations are solved for jointly.
    """
    n = len(mus)
    if not consecutive:
        out = np.zeros((n, 3))
        for j in range(1, n):
            out[j] = estimate_translation_pair(mus[0], mus[j], rotations[0], rotations[j], None, floor)
        return out
    # unknowns x_j = R_j d_j for j >= 1, stacked
    rows, rhs = [], []

    def add(s, t):
        for sys_ in build_phase_system(mus[s], mus[t], rotations[s], rotations[t], floor):
            block = np.zeros((len(sys_), 3 * (n - 1)))
            block[:, 3 * (t - 1): 3 * t] = sys_.directions
            if s > 0:
                block[:, 3 * (s - 1): 3 * s] = -sys_.directions
            rows.append(block)
            rhs.append(sys_.rhs)

    for j in range(1, n):
        add(0, j)
        if j > 1:
            add(j - 1, j)
    x, *_ = np.linalg.lstsq(np.concatenate(rows), np.concatenate(rhs), rcond=None)
    out = np.zeros((n, 3))
    for j in range(1, n):
        out[j] = np.asarray(rotations[j]).T @ x[3 * (j - 1): 3 * j]
    return out


# --- degenerate pairs ----------------------------------------------------


def _grid_steps(alpha: float, dphi: float):
    m = alpha / dphi
    mr = int(round(m))
    return mr if abs(m - mr) <= ON_GRID_TOL * max(1.0, abs(m)) else None


def build_degenerate_phase_system(mu_s: MuFrame, mu_t: MuFrame, Rs, Rt, alpha: float, reflected: bool,
                                  floor: float = AMPLITUDE_FLOOR) -> PhaseSystem:
    """Phase equations over the whole disk for a pair with ``Rt = Rs Q(alpha)``
    or ``Rt = Rs Qy(pi) Q(alpha)`` (``reflected``).

    For ``alpha`` on the angular grid the partner of each node is again a
    node; otherwise ``mu_t`` is evaluated at the rotated points. Phases
    are unwrapped along every ray outward from the two nodes nearest the
    center.
    """
    grid = mu_s.grid
    if grid != mu_t.grid:
        raise ValueError("frames live on different grids")
    m = _grid_steps(alpha, grid.dphi)
    if m is not None:
        I, L = node_map(grid, -m, reflected)
        partner = mu_t.values[I, L]
    else:
        pts = grid.points.copy()
        if reflected:
            pts[..., 1] *= -1.0
        c, s_ = np.cos(alpha), np.sin(alpha)
        rot = np.stack([c * pts[..., 0] + s_ * pts[..., 1], -s_ * pts[..., 0] + c * pts[..., 1]], axis=-1)
        partner = mu_t(rot)
        partner[np.linalg.norm(rot, axis=-1) > TRUST_FRACTION * grid.k0] = np.nan
    if reflected:
        partner = np.conj(partner)
    num = mu_s.values
    ok = np.isfinite(partner) & (np.abs(num) > _floor(mu_s, floor)) & (np.abs(partner) > _floor(mu_t, floor))
    phase = np.angle(num / np.where(ok, partner, 1.0))
    dirs = h_map(grid.points, grid.k0) @ np.asarray(Rs, dtype=float).T
    N = grid.N
    out_dirs, out_rhs = [], []
    for ell in range(2 * N):
        for idx in (np.arange(N, 2 * N), np.arange(N - 1, -1, -1)):
            ray_ok = ok[idx, ell]
            if not ray_ok[0]:
                continue
            stop = len(idx) if ray_ok.all() else int(np.argmin(ray_ok))
            sel = idx[:stop]
            out_rhs.append(phase_unwrap(phase[sel, ell], 0))
            out_dirs.append(dirs[sel, ell])
    if not out_rhs:
        raise InsufficientAmplitudeError("no node above the amplitude floor")
    return PhaseSystem(np.concatenate(out_dirs), np.concatenate(out_rhs), "degenerate")


# --- optical center ------------------------------------------------------


def _origin_derivatives(mu: MuFrame):
    """Fourth-order estimates of ``mu(0)`` and its two partial derivatives
    from the four nodes nearest 0 on the phi = 0 and phi = pi/2 rays."""
    grid = mu.grid
    N = grid.N
    h = grid.dr
    vals = []
    for ell in (0, N):
        col = mu.values[:, ell]
        m1, p1, m3, p3 = col[N - 1], col[N], col[N - 2], col[N + 1]
        d1 = (p1 - m1) / h
        d3 = (p3 - m3) / (3.0 * h)
        vals.append(((9.0 * (p1 + m1) - (p3 + m3)) / 16.0, (9.0 * d1 - d3) / 8.0))
    mu0 = 0.5 * (vals[0][0] + vals[1][0])
    return mu0, np.array([vals[0][1], vals[1][1]])


def optical_center_rows(mu: MuFrame, R, d=None, floor: float = AMPLITUDE_FLOOR):
    """Two linear equations ``<C, R e^i> = b_i`` (i = 1, 2) for the optical center ``C``."""
    mu0, grad = _origin_derivatives(mu)
    if abs(mu0) <= _floor(mu, floor):
        raise InsufficientAmplitudeError("|mu(0)| below the amplitude floor")
    raw = np.real(1j * grad / mu0)
    d = np.zeros(3) if d is None else np.asarray(d, dtype=float)
    R = np.asarray(R, dtype=float)
    return R[:, :2].T, raw - d[:2]


def optical_center(frames, floor: float = AMPLITUDE_FLOOR) -> np.ndarray:
    """Optical center from ``(mu, R, d)`` triples whose rotations do not all
    share the image of e3."""
    rows, rhs = [], []
    for mu, R, d in frames:
        A, b = optical_center_rows(mu, R, d, floor)
        rows.append(A)
        rhs.append(b)
    A = np.concatenate(rows)
    sv = np.linalg.svd(A, compute_uv=False)
    if len(sv) < 3 or sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficiencyError("frames do not determine all three components")
    C, *_ = np.linalg.lstsq(A, np.concatenate(rhs), rcond=None)
    return C
