"""Hemisphere parameterization and exact simulation of the scaled data.

The scaled measurement of the object moved by ``x -> R^T x + d`` is
``mu(k) = F[f](R h(k)) exp(-i <d, h(k)>)`` and its scaled squared energy
is ``nu = |mu|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import OutOfDiskError
from .phantom import Phantom

DEFAULT_K0 = 2.0 * np.pi


def kappa(k, k0: float = DEFAULT_K0):
    k = np.asarray(k, dtype=float)
    r2 = np.sum(k * k, axis=-1)
    if np.any(r2 >= k0 * k0):
        raise OutOfDiskError("frequency outside the open disk of radius k0")
    return np.sqrt(k0 * k0 - r2)


def h_map(k, k0: float = DEFAULT_K0) -> np.ndarray:
    """Lift ``k`` in the disk onto the hemisphere through the origin,
    ``h(k) = (k1, k2, kappa(k) - k0)``."""
    k = np.asarray(k, dtype=float)
    return np.concatenate([k, (kappa(k, k0) - k0)[..., None]], axis=-1)


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Signed-radius polar lattice of the disk.

    ``2N`` radii ``(n + 1/2 - N) k0 / N`` (symmetric, zero excluded) and
    ``2N`` angles ``l pi / (2N)`` in [0, pi). Node ``(i, l)`` is the point
    ``radii[i] * (cos angles[l], sin angles[l])``.
    """

    N: int
    k0: float = DEFAULT_K0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("grid needs N >= 2")

    @cached_property
    def radii(self) -> np.ndarray:
        return (np.arange(2 * self.N) + 0.5 - self.N) * (self.k0 / self.N)

    @cached_property
    def angles(self) -> np.ndarray:
        return np.arange(2 * self.N) * (np.pi / (2 * self.N))

    @property
    def dr(self) -> float:
        return self.k0 / self.N

    @property
    def dphi(self) -> float:
        return np.pi / (2 * self.N)

    @property
    def shape(self):
        return (2 * self.N, 2 * self.N)

    @cached_property
    def points(self) -> np.ndarray:
        """Cartesian nodes, shape ``(2N, 2N, 2)``."""
        r = self.radii[:, None]
        return np.stack([r * np.cos(self.angles), r * np.sin(self.angles)], axis=-1)

    def __eq__(self, other):
        return isinstance(other, PolarGrid) and self.N == other.N and self.k0 == other.k0

    def __hash__(self):
        return hash((self.N, self.k0))


@dataclass(frozen=True, eq=False)
class MuFrame:
    grid: PolarGrid
    time: float
    values: np.ndarray  # complex, shape grid.shape

    @property
    def nu(self) -> "NuFrame":
        return NuFrame(self.grid, self.time, np.abs(self.values) ** 2)

    @cached_property
    def interpolator(self):
        from .interp import PolarSpline

        return PolarSpline(self.grid, self.values)

    def __call__(self, points) -> np.ndarray:
        return self.interpolator(points)


@dataclass(frozen=True, eq=False)
class AnalyticMu:
    """Exact ``mu`` of a moved phantom: node ``values`` like a :class:`MuFrame`,
    but calls evaluate the model instead of interpolating."""

    phantom: Phantom
    R: np.ndarray
    d: np.ndarray
    grid: "PolarGrid"
    time: float = 0.0

    @cached_property
    def values(self) -> np.ndarray:
        return simulate_mu(self.phantom, self.R, self.d, self.grid, self.time).values

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        inside = np.sum(pts * pts, axis=-1) < self.grid.k0**2
        safe = np.where(inside[..., None], pts, 0.0)
        return np.where(inside, mu_at(self.phantom, self.R, self.d, safe, self.grid.k0), np.nan)


@dataclass(frozen=True, eq=False)
class NuFrame:
    grid: PolarGrid
    time: float
    values: np.ndarray  # real >= 0, shape grid.shape

    @cached_property
    def interpolator(self):
        from .interp import PolarSpline

        return PolarSpline(self.grid, self.values)

    def __call__(self, points) -> np.ndarray:
        return self.interpolator(points)


@dataclass(frozen=True, eq=False)
class RigidTrajectory:
    """Sampled motion with ``R[0] = I`` and ``d[0] = 0``."""

    times: np.ndarray
    rotations: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "rotations", np.asarray(self.rotations, dtype=float))
        tr = self.translations
        if tr is None:
            tr = np.zeros((len(self.times), 3))
        object.__setattr__(self, "translations", np.asarray(tr, dtype=float))
        if not np.allclose(self.rotations[0], np.eye(3), atol=1e-14, rtol=0):
            raise ValueError("trajectory must start at the identity rotation")
        if np.any(self.translations[0] != 0.0):
            raise ValueError("trajectory must start at zero translation")

    def __len__(self):
        return len(self.times)


def simulate_mu(ph: Phantom, R, d, grid: PolarGrid, time: float = 0.0) -> MuFrame:
    h = h_map(grid.points, grid.k0)
    R = np.asarray(R, dtype=float)
    d = np.zeros(3) if d is None else np.asarray(d, dtype=float)
    vals = ph.ft(h @ R.T) * np.exp(-1j * (h @ d))
    return MuFrame(grid, time, vals)


def simulate_nu(ph: Phantom, R, d, grid: PolarGrid, time: float = 0.0) -> NuFrame:
    return simulate_mu(ph, R, d, grid, time).nu


def mu_at(ph: Phantom, R, d, k, k0: float = DEFAULT_K0) -> np.ndarray:
    """Exact ``mu`` at arbitrary disk points ``k`` of shape ``(..., 2)``."""
    h = h_map(k, k0)
    val = ph.ft(h @ np.asarray(R, dtype=float).T)
    if d is not None:
        val = val * np.exp(-1j * (h @ np.asarray(d, dtype=float)))
    return val


def nu_at(ph: Phantom, R, k, k0: float = DEFAULT_K0) -> np.ndarray:
    return np.abs(mu_at(ph, R, None, k, k0)) ** 2


def simulate_frames(ph: Phantom, traj: RigidTrajectory, grid: PolarGrid, noise: float = 0.0, rng=None):
    """Simulate one ``MuFrame`` per trajectory sample.

    ``noise`` adds complex Gaussian perturbations of standard deviation
    ``noise`` (per real component) to ``mu``.
    """
    frames = []
    if noise > 0.0 and rng is None:
        rng = np.random.default_rng(0)
    for t, R, d in zip(traj.times, traj.rotations, traj.translations):
        fr = simulate_mu(ph, R, d, grid, float(t))
        if noise > 0.0:
            pert = rng.normal(scale=noise, size=fr.values.shape) + 1j * rng.normal(scale=noise, size=fr.values.shape)
            fr = MuFrame(grid, fr.time, fr.values + pert)
        frames.append(fr)
    return frames


def forward_factor(k, r_M: float, k0: float = DEFAULT_K0):
    """Factor linking the detector data to ``F[f](h(k))``:
    ``sqrt(pi/2) i exp(i kappa r_M) / kappa``."""
    kap = kappa(k, k0)
    return np.sqrt(np.pi / 2.0) * 1j * np.exp(1j * kap * r_M) / kap


def scale_measurement(m_hat, k, r_M: float, k0: float = DEFAULT_K0):
    """Scaled measurement ``-i sqrt(2/pi) kappa exp(-i kappa r_M) m_hat``."""
    kap = kappa(k, k0)
    return -1j * np.sqrt(2.0 / np.pi) * kap * np.exp(-1j * kap * r_M) * np.asarray(m_hat)
