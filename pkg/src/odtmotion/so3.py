"""Rotations, z-y-z Euler angles, angular velocities and Lie-group time stepping.

Rotations and skew matrices are plain ``(3, 3)`` float arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateInputError

TWO_PI = 2.0 * np.pi

# |cos(theta)| above this is treated as the gimbal case theta in {0, pi}
GIMBAL_TOL = 1e-12


class EulerZYZ(NamedTuple):
    """Euler angles with R = Qz(phi) Qy(theta) Qz(psi)."""

    phi: float
    theta: float
    psi: float

    def canonical(self) -> "EulerZYZ":
        return rotation_to_euler(euler_to_rotation(self))


@dataclass(frozen=True)
class AngularVelocity:
    """Angular velocity in signed cylindrical coordinates.

    ``rho`` may be negative; ``phi`` is restricted to [0, pi).
    """

    rho: float
    phi: float
    zeta: float

    @property
    def cartesian(self) -> np.ndarray:
        return np.array([self.rho * np.cos(self.phi), self.rho * np.sin(self.phi), self.zeta])

    @classmethod
    def from_cartesian(cls, omega) -> "AngularVelocity":
        w = np.asarray(omega, dtype=float)
        rho = float(np.hypot(w[0], w[1]))
        phi = float(np.arctan2(w[1], w[0]))
        if rho == 0.0:
            phi = 0.0
        elif phi < 0.0 or phi >= np.pi:
            phi = phi + np.pi if phi < 0.0 else phi - np.pi
            rho = -rho
        return cls(rho, phi % np.pi, float(w[2]))


def axis_rotation_y(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def axis_rotation_z(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rotation(e) -> np.ndarray:
    phi, theta, psi = e
    return axis_rotation_z(phi) @ axis_rotation_y(theta) @ axis_rotation_z(psi)


def rotation_to_euler(R) -> EulerZYZ:
    """Canonical z-y-z Euler angles of a rotation matrix.

    In the gimbal case the second z-angle is set to zero, so that
    ``theta in {0, pi}`` implies ``psi == 0``.
    """
    return EulerZYZ(*map(float, euler_angles(R)))


def euler_angles(R) -> np.ndarray:
    """Canonical (phi, theta, psi) of a stack of rotations, shape (..., 3)."""
    R = np.asarray(R, dtype=float)
    c = R[..., 2, 2]
    top = c > 1.0 - GIMBAL_TOL
    bottom = c < -1.0 + GIMBAL_TOL
    theta = np.where(top, 0.0, np.where(bottom, np.pi, np.arctan2(np.hypot(R[..., 0, 2], R[..., 1, 2]), c)))
    # gimbal: Qz(phi) or Qz(phi) diag(-1, 1, -1)
    sign = np.where(bottom, -1.0, 1.0)
    phi_g = np.arctan2(sign * R[..., 1, 0], sign * R[..., 0, 0])
    gimbal = top | bottom
    phi = np.where(gimbal, phi_g, np.arctan2(R[..., 1, 2], R[..., 0, 2]))
    psi = np.where(gimbal, 0.0, np.arctan2(R[..., 2, 1], -R[..., 2, 0]))
    return np.stack([phi % TWO_PI, theta, psi % TWO_PI], axis=-1)


def hat(omega) -> np.ndarray:
    """Skew matrix W with W @ y == cross(omega, y)."""
    if isinstance(omega, AngularVelocity):
        omega = omega.cartesian
    w1, w2, w3 = np.asarray(omega, dtype=float)
    return np.array([[0.0, -w3, w2], [w3, 0.0, -w1], [-w2, w1, 0.0]])


def vee(W) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    return np.array([W[2, 1], W[0, 2], W[1, 0]])


def rodrigues_exp(axis, angle: float) -> np.ndarray:
    n = np.asarray(axis, dtype=float)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("rotation axis must have unit norm")
    N = hat(n)
    return np.eye(3) + np.sin(angle) * N + (1.0 - np.cos(angle)) * (N @ N)


def polar_retract(A, tol: float = 1e-14, max_iter: int = 50) -> np.ndarray:
    """Orthogonal polar factor of ``A`` by the Newton iteration
    ``A <- (A + A^{-T}) / 2``.

    Raises
    ------
    DegenerateInputError
        If ``det(A) <= 0`` or ``A`` is numerically singular.
    """
    X = np.array(A, dtype=float)
    if np.linalg.det(X) <= 0.0:
        raise DegenerateInputError("polar retraction needs det(A) > 0")
    if np.linalg.cond(X) > 1e12:
        raise DegenerateInputError("polar retraction of a near-singular matrix")
    for _ in range(max_iter):
        Y = 0.5 * (X + np.linalg.inv(X).T)
        delta = np.linalg.norm(Y - X)
        X = Y
        if delta < tol:
            break
    return X


def cayley(W) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    eye = np.eye(3)
    M = eye - 0.5 * W
    if abs(np.linalg.det(M)) < 1e-14:
        raise DegenerateInputError("I - W/2 is singular")
    return np.linalg.solve(M, eye + 0.5 * W)


def cayley_retract(R, Wdt) -> np.ndarray:
    return np.asarray(R, dtype=float) @ cayley(Wdt)


def retract(R, Wdt, method: str = "cayley") -> np.ndarray:
    """Map the tangent step ``R @ Wdt`` at ``R`` back onto SO(3)."""
    if method == "cayley":
        return cayley_retract(R, Wdt)
    if method == "polar":
        return polar_retract(R + R @ Wdt)
    raise ValueError(f"unknown retraction {method!r}")


def integrate_rotation(times: Sequence[float], omegas, retraction: str = "cayley") -> np.ndarray:
    """Euler steps on SO(3) for R' = R hat(omega), R(t0) = I.

    Parameters
    ----------
    times : (n,) strictly increasing
    omegas : (n, 3) Cartesian angular velocities, or a sequence of
        :class:`AngularVelocity`. The last one is never used.
    retraction : {"cayley", "polar"}

    Returns
    -------
    (n, 3, 3) array with ``R[j]`` approximating the rotation at ``times[j]``.
    """
    t = np.asarray(times, dtype=float)
    if len(omegas) and isinstance(omegas[0], AngularVelocity):
        omegas = [w.cartesian for w in omegas]
    w = np.asarray(omegas, dtype=float).reshape(len(t), 3)
    if np.any(np.diff(t) <= 0.0):
        raise ValueError("integration times must be strictly increasing")
    out = np.empty((len(t), 3, 3))
    out[0] = np.eye(3)
    for j in range(len(t) - 1):
        out[j + 1] = retract(out[j], (t[j + 1] - t[j]) * hat(w[j]), retraction)
    return out


def is_rotation(R, tol: float = 1e-12) -> bool:
    R = np.asarray(R, dtype=float)
    return bool(
        np.linalg.norm(R.T @ R - np.eye(3)) < tol and abs(np.linalg.det(R) - 1.0) < tol
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed rotation via a unit quaternion."""
    q = rng.normal(size=4)
    a, b, c, d = q / np.linalg.norm(q)
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d],
        ]
    )
