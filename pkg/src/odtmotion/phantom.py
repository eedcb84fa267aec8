"""Ellipsoid-sum phantoms with closed-form 3D Fourier transforms.

The Fourier transform uses the unitary convention
``F[g](y) = (2 pi)^{-3/2} int g(x) exp(-i <x, y>) dx``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .so3 import euler_to_rotation, is_rotation

FT_NORM = (2.0 * np.pi) ** -1.5
_SERIES_CUTOFF = 0.1


def ball_ft(rho_norm, radius: float = 1.0):
    """Fourier transform of the indicator of a centered ball.

    ``(2 pi)^{-3/2} 4 pi (sin(rho r) - rho r cos(rho r)) / rho^3``, with a
    Taylor expansion for ``rho r < 0.1`` where the closed form cancels
    badly. Works elementwise on arrays.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    rho = np.abs(np.asarray(rho_norm, dtype=float))
    x = rho * radius
    out = np.empty_like(x)
    small = x < _SERIES_CUTOFF
    xs = x[small]
    x2 = xs * xs
    # (sin x - x cos x) / x^3 = 1/3 - x^2/30 + x^4/840 - x^6/45360 + x^8/3991680 - ...
    out[small] = 1.0 / 3.0 + x2 * (-1.0 / 30.0 + x2 * (1.0 / 840.0 + x2 * (-1.0 / 45360.0 + x2 / 3991680.0)))
    xl = x[~small]
    out[~small] = (np.sin(xl) - xl * np.cos(xl)) / xl**3
    out *= 4.0 * np.pi * radius**3 * FT_NORM
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Image of the unit ball under ``u -> center + orientation @ diag(semi_axes) @ u``."""

    center: np.ndarray
    orientation: np.ndarray
    semi_axes: np.ndarray
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "semi_axes", np.asarray(self.semi_axes, dtype=float).reshape(3))
        if np.any(self.semi_axes <= 0):
            raise ValueError("semi-axes must be positive")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if not is_rotation(self.orientation, 1e-10):
            raise ValueError("orientation must be a rotation matrix")

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * np.pi * float(np.prod(self.semi_axes))

    def ft(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        stretched = (y @ self.orientation) * self.semi_axes
        phase = np.exp(-1j * (y @ self.center))
        scale = self.amplitude * float(np.prod(self.semi_axes))
        return scale * phase * ball_ft(np.linalg.norm(stretched, axis=-1), 1.0)

    def contains(self, x) -> np.ndarray:
        u = ((np.asarray(x, dtype=float) - self.center) @ self.orientation) / self.semi_axes
        return np.sum(u * u, axis=-1) <= 1.0


@dataclass(frozen=True, eq=False)
class Phantom:
    parts: tuple
    support_radius: float

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        for p in self.parts:
            if np.linalg.norm(p.center) + p.semi_axes.max() > self.support_radius + 1e-12:
                raise ValueError("ellipsoid exceeds the support radius")

    def ft(self, y) -> np.ndarray:
        """Fourier transform at points ``y`` of shape ``(..., 3)``."""
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape[:-1], dtype=complex)
        for p in self.parts:
            out = out + p.ft(y)
        return out

    def mass(self) -> float:
        return sum(p.amplitude * p.volume for p in self.parts)

    def first_moment(self) -> np.ndarray:
        return sum(p.amplitude * p.volume * p.center for p in self.parts)

    def optical_center(self) -> np.ndarray:
        return self.first_moment() / self.mass()

    def density(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(p.amplitude * p.contains(x) for p in self.parts)

    def to_dict(self) -> dict:
        return {
            "support_radius": self.support_radius,
            "ellipsoids": [
                {
                    "center": p.center.tolist(),
                    "orientation": p.orientation.tolist(),
                    "semi_axes": p.semi_axes.tolist(),
                    "amplitude": p.amplitude,
                }
                for p in self.parts
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Phantom":
        parts = []
        for e in d["ellipsoids"]:
            if "orientation" in e:
                Q = np.asarray(e["orientation"], dtype=float)
            else:
                Q = euler_to_rotation(e.get("euler", (0.0, 0.0, 0.0)))
            parts.append(Ellipsoid(e["center"], Q, e["semi_axes"], float(e.get("amplitude", 1.0))))
        return cls(tuple(parts), float(d["support_radius"]))


def phantom_ft(ph: Phantom, y) -> np.ndarray:
    return ph.ft(y)


def single_ball(center=(0.0, 0.0, 0.0), radius: float = 1.0, amplitude: float = 1.0) -> Phantom:
    c = np.asarray(center, dtype=float)
    ball = Ellipsoid(c, np.eye(3), (radius, radius, radius), amplitude)
    return Phantom((ball,), float(np.linalg.norm(c) + radius))


# (center, euler zyz, semi-axes, amplitude)
_ASYM_CELL = (
    ((0.10, -0.05, 0.00), (0.30, 0.40, 0.10), (1.25, 0.95, 0.75), 10.0),
    ((0.45, 0.25, 0.15), (1.00, 0.70, 0.20), (0.45, 0.35, 0.30), 15.0),
    ((-0.55, -0.30, 0.10), (2.10, 1.20, 0.50), (0.30, 0.22, 0.26), 20.0),
    ((-0.15, 0.55, -0.30), (0.80, 2.00, 1.40), (0.35, 0.18, 0.20), 12.0),
    ((0.60, -0.45, -0.25), (4.00, 0.60, 2.50), (0.20, 0.30, 0.15), 25.0),
)


def default_phantom() -> Phantom:
    """Five overlapping ellipsoids with distinct centers, shapes and amplitudes."""
    parts = tuple(
        Ellipsoid(c, euler_to_rotation(e), a, amp) for c, e, a, amp in _ASYM_CELL
    )
    return Phantom(parts, 1.6)
