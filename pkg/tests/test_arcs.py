import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odtmotion.arcs import (arc_basis, beta_grid, detect_degenerate, gamma, gamma_dual, gamma_dual_euler,
                            gamma_euler, interval_from_cos, interval_J, interval_J_dual, is_degenerate_pair,
                            node_map, sigma, sigma_dual)
from odtmotion.errors import AmbiguityError, DegenerateInputError
from odtmotion.forward import PolarGrid, h_map, simulate_nu
from odtmotion.phantom import single_ball
from odtmotion.so3 import axis_rotation_y, axis_rotation_z, euler_to_rotation, random_rotation, rotation_to_euler

from conftest import K0, random_pair

E3 = np.array([0.0, 0.0, 1.0])


def on_sphere(x, R):
    """Distance of x from the sphere R h(B) (center -k0 R e3, radius k0)."""
    return abs(np.linalg.norm(x + K0 * (R @ E3), axis=-1) - K0)


def test_arc_basis_quarter_turn():
    mp.mp.dps = 30
    B = arc_basis(np.eye(3), axis_rotation_y(np.pi / 2), K0)
    oracle = float(mp.pi * mp.sqrt(2))
    assert abs(B.a - oracle) < 1e-14 and abs(B.a_star - oracle) < 1e-14
    assert abs(B.a**2 + B.a_star**2 - K0**2) < 1e-10
    assert abs(B.a - 4.442883) < 1e-6


def test_arc_basis_invariants(rng):
    for _ in range(100):
        Rs, Rt = random_pair(rng, 1e-3)
        B = arc_basis(Rs, Rt, K0)
        V = np.column_stack([B.v1, B.v2, B.v3])
        assert np.abs(V.T @ V - np.eye(3)).max() < 1e-12
        assert abs(np.linalg.det(V) - 1.0) < 1e-12
        assert abs(B.a**2 + B.a_star**2 - K0**2) < 1e-10
        x = np.cross(Rs @ E3, Rt @ E3)
        assert np.allclose(B.v2, x / np.linalg.norm(x), atol=1e-12)
        assert abs(B.w1 @ B.w2) < 1e-12


def test_degenerate_pair_rejected():
    with pytest.raises(DegenerateInputError):
        arc_basis(np.eye(3), axis_rotation_z(0.4))
    with pytest.raises(DegenerateInputError):
        gamma(np.eye(3), axis_rotation_y(np.pi), 0.1)
    assert is_degenerate_pair(np.eye(3), axis_rotation_y(np.pi) @ axis_rotation_z(1.0))


def test_intervals():
    assert interval_from_cos(0.0).kind == "full" and interval_from_cos(0.0, dual=True).kind == "full"
    cap = interval_from_cos(0.5)
    assert cap.kind == "capped" and abs(cap.beta_max - 1.910633) < 1e-6
    assert abs(cap.beta_max - float(mp.acos(mp.mpf(-1) / 3))) < 1e-15
    dual = interval_from_cos(-0.5, dual=True)
    assert dual.kind == "capped" and abs(dual.beta_max - cap.beta_max) < 1e-15
    assert interval_from_cos(-0.5).kind == "full" and interval_from_cos(0.5, dual=True).kind == "full"
    R = axis_rotation_y(np.pi / 3)
    assert interval_J(np.eye(3), R).kind == "capped" and interval_J_dual(np.eye(3), R).kind == "full"


@given(st.floats(-0.999, 0.999))
def test_capped_interval_contains_half_turn_range(c):
    for dual in (False, True):
        J = interval_from_cos(c, dual)
        if J.kind == "capped":
            assert np.pi / 2 < J.beta_max < np.pi
        assert J.contains(np.array([-np.pi / 2, 0.0, np.pi / 2])).all()


def test_sigma_examples(rng):
    Rs, Rt = random_pair(rng)
    assert np.allclose(sigma(Rs, Rt, 0.0), 0.0, atol=0) and np.allclose(sigma_dual(Rs, Rt, 0.0), 0.0, atol=0)
    beta = np.linspace(-np.pi / 2, np.pi / 2, 41)
    assert np.abs(sigma(Rs, Rt, beta) - sigma(Rt, Rs, -beta)).max() < 1e-12
    s = sigma(Rs, Rt, beta)
    assert on_sphere(s, Rs).max() < 1e-12 and on_sphere(s, Rt).max() < 1e-12
    sd = sigma_dual(Rs, Rt, beta)
    assert on_sphere(sd, Rs).max() < 1e-12 and on_sphere(-sd, Rt).max() < 1e-12


def test_beta_outside_interval_rejected():
    R = axis_rotation_y(0.3)
    with pytest.raises(ValueError):
        sigma(np.eye(3), R, 3.0)


def test_gamma_at_zero_is_origin(rng):
    Rs, Rt = random_pair(rng)
    assert np.array_equal(gamma(Rs, Rt, 0.0), np.zeros(2))
    assert np.allclose(gamma_dual(Rs, Rt, 0.0), 0.0, atol=0)


def _identity_residuals(Rs, Rt, b, bd):
    primal = np.abs(h_map(gamma(Rs, Rt, b)) @ Rs.T - h_map(gamma(Rt, Rs, -b)) @ Rt.T).max(axis=-1)
    dual = np.abs(h_map(gamma_dual(Rs, Rt, bd)) @ Rs.T + h_map(gamma_dual(Rt, Rs, bd)) @ Rt.T).max(axis=-1)
    return primal, dual


def test_arc_identities_random(rng):
    worst = 0.0
    for _ in range(1000):
        Rs, Rt = random_pair(rng, 1e-3)
        b = rng.uniform(-np.pi / 2, np.pi / 2, 4)
        worst = max(worst, *(r.max() for r in _identity_residuals(Rs, Rt, b, b)))
    assert worst < 1e-12


def test_arc_identities_on_whole_interval(rng):
    # beyond |beta| = pi/2 the arcs approach the rim, where kappa = sqrt(k0^2 - |k|^2)
    # amplifies rounding by k0 / kappa
    for _ in range(500):
        Rs, Rt = random_pair(rng, 1e-3)
        c = (Rs @ E3) @ (Rt @ E3)
        bounds = [J.beta_max if J.kind == "capped" else np.pi for J in (interval_from_cos(c), interval_from_cos(c, True))]
        b, bd = (rng.uniform(-hi, hi, 4) * (1 - 1e-9) for hi in bounds)
        primal, dual = _identity_residuals(Rs, Rt, b, bd)
        for res, pts in ((primal, gamma(Rs, Rt, b)), (dual, gamma_dual(Rs, Rt, bd))):
            kap = np.sqrt(np.maximum(K0**2 - np.sum(pts**2, axis=-1), 1e-300))
            assert np.all(res < 1e-13 * (1.0 + K0 / kap))


def test_gamma_euler_example():
    mp.mp.dps = 30
    g = gamma_euler(0.0, np.pi / 2, np.pi / 2, K0)
    assert np.allclose(g, [-float(mp.pi), float(mp.pi * mp.sqrt(2))], atol=1e-14)
    assert np.array_equal(gamma_euler(0.3, 1.0, 0.0), np.zeros(2))


def test_gamma_euler_matches_basis_form(rng):
    beta = np.linspace(-np.pi / 2, np.pi / 2, 21)
    for _ in range(200):
        Rs, Rt = random_pair(rng, 1e-3)
        phi, theta, psi = rotation_to_euler(Rs.T @ Rt)
        assert np.abs(gamma_euler(phi, theta, beta) - gamma(Rs, Rt, beta)).max() < 1e-12
        assert np.abs(gamma_dual_euler(phi, theta, beta) - gamma_dual(Rs, Rt, beta)).max() < 1e-12
        # the partner arc uses the Euler angles of the transpose
        assert np.abs(gamma_euler(np.pi - psi, theta, beta) - gamma(Rt, Rs, beta)).max() < 1e-12


@given(st.floats(0, 2 * np.pi), st.floats(0.01, np.pi - 0.01))
@settings(max_examples=100)
def test_ellipse_semi_axis(phi, theta):
    g = gamma_euler(phi, theta, np.pi / 2, K0)
    w2 = np.array([-np.sin(phi), np.cos(phi)])
    assert abs(g @ w2 - K0 * np.cos(theta / 2)) < 1e-12


def test_beta_grid():
    b = beta_grid(8)
    assert len(b) == 17 and b[0] == -np.pi / 2 and b[-1] == np.pi / 2 and b[8] == 0.0


def test_node_map_is_rotation_of_nodes():
    g = PolarGrid(8, K0)
    for steps, reflect in ((3, False), (-5, False), (2, True), (19, True)):
        I, L = node_map(g, steps, reflect)
        p = g.points.copy()
        if reflect:
            p[..., 1] *= -1
        a = steps * g.dphi
        c, s = np.cos(a), np.sin(a)
        q = np.stack([c * p[..., 0] - s * p[..., 1], s * p[..., 0] + c * p[..., 1]], axis=-1)
        assert np.abs(g.points[I, L] - q).max() < 1e-12


class TestDetectDegenerate:
    def test_axial_rotation(self, phantom, grid32, rng):
        Rs = random_rotation(rng)
        nu_s = simulate_nu(phantom, Rs, None, grid32)
        match = detect_degenerate(nu_s, simulate_nu(phantom, Rs @ axis_rotation_z(np.pi / 3), None, grid32))
        assert match is not None and not match.reflected
        assert abs(match.alpha - np.pi / 3) < grid32.dphi

    def test_identity(self, phantom, grid32):
        nu = simulate_nu(phantom, np.eye(3), None, grid32)
        match = detect_degenerate(nu, nu)
        assert match == (0.0, False, 0.0)

    def test_off_grid_angle_and_reflection(self, phantom, grid32, rng):
        Rs = random_rotation(rng)
        nu_s = simulate_nu(phantom, Rs, None, grid32)
        Rt = Rs @ axis_rotation_y(np.pi) @ axis_rotation_z(1.2345)
        match = detect_degenerate(nu_s, simulate_nu(phantom, Rt, None, grid32))
        assert match is not None and match.reflected
        assert abs(match.alpha - 1.2345) < grid32.dphi

    def test_generic_pair_is_not_degenerate(self, phantom, grid32, rng):
        for _ in range(3):
            Rs, Rt = random_pair(rng, 0.2)
            assert detect_degenerate(simulate_nu(phantom, Rs, None, grid32),
                                     simulate_nu(phantom, Rt, None, grid32)) is None

    def test_symmetric_object_is_ambiguous(self, grid32):
        nu = simulate_nu(single_ball(radius=0.8), np.eye(3), None, grid32)
        with pytest.raises(AmbiguityError):
            detect_degenerate(nu, nu)
