"""Bicubic spline interpolation of data sampled on a signed-radius polar grid."""
from __future__ import annotations

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .forward import PolarGrid

COVER_FRACTION = 0.995


def cover_radius(grid: PolarGrid) -> float:
    """Largest radius at which interpolated values are trusted."""
    return min(COVER_FRACTION * grid.k0, float(grid.radii[-1]))


def wrap_extend(grid: PolarGrid, values: np.ndarray, pad: int) -> tuple[np.ndarray, np.ndarray]:
    """Extend angle columns beyond [0, pi) using ``(r, phi + pi) == (-r, phi)``."""
    n = values.shape[1]
    idx = np.arange(-pad, n + pad)
    cols = idx % n
    flip = (idx < 0) | (idx >= n)
    ext = values[:, cols].copy()
    ext[:, flip] = ext[::-1, flip]
    return idx * grid.dphi, ext


def to_signed_polar(points) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian ``(..., 2)`` points to (signed r, phi in [0, pi))."""
    p = np.asarray(points, dtype=float)
    x, y = p[..., 0], p[..., 1]
    # reflect the lower half-plane (and the negative x-axis) through 0
    flip = (y < 0.0) | ((y == 0.0) & (x < 0.0))
    x = np.where(flip, -x, x)
    y = np.where(flip, -y, y)
    r = np.hypot(x, y)
    phi = np.arctan2(y, x)
    return np.where(flip, -r, r), phi


class PolarSpline:
    """Interpolating bicubic spline in (signed r, phi).

    Points farther than :func:`cover_radius` from the origin evaluate to NaN.
    Complex data are handled as two real splines.
    """

    def __init__(self, grid: PolarGrid, values):
        values = np.asarray(values)
        self.grid = grid
        self.cover = cover_radius(grid)
        self.is_complex = np.iscomplexobj(values)
        pad = max(4, grid.N // 2)
        parts = (values.real, values.imag) if self.is_complex else (values,)
        self._splines = []
        for part in parts:
            ang, ext = wrap_extend(grid, np.asarray(part, dtype=float), pad)
            self._splines.append(RectBivariateSpline(grid.radii, ang, ext, kx=3, ky=3, s=0))

    def polar(self, r, phi) -> np.ndarray:
        """Evaluate at signed radius ``r`` and angle ``phi`` in [0, pi)."""
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        vals = [s.ev(r, phi) for s in self._splines]
        out = vals[0] + 1j * vals[1] if self.is_complex else vals[0]
        return np.where(np.abs(r) <= self.cover, out, np.nan)

    def __call__(self, points) -> np.ndarray:
        r, phi = to_signed_polar(points)
        return self.polar(r, phi)


def interp_nu(frame, point) -> float | np.ndarray:
    """Spline value of a frame at Cartesian ``point``; NaN outside the covered disk."""
    return frame.interpolator(point) if hasattr(frame, "interpolator") else PolarSpline(frame.grid, frame.values)(point)
