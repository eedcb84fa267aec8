import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from odtmotion.arcs import gamma, gamma_dual
from odtmotion.direct import estimate_rotation_direct
from odtmotion.errors import DegenerateInputError, OutOfDiskError
from odtmotion.forward import h_map, simulate_nu
from odtmotion.infinitesimal import analytic_dphi_nu, analytic_dt_nu
from odtmotion.so3 import AngularVelocity, euler_to_rotation, random_rotation, rotation_to_euler
from odtmotion.stereo import (LinePair, _perp, check_inf_relation_stereo, collinearity_check, estimate_rotation_stereo,
                              line_energy, line_from_euler, stereographic_projection, tau, tau_inv, transform_nu)

from conftest import K0, random_pair

disk_points = st.tuples(st.floats(0.01, 0.999), st.floats(0, 2 * np.pi)).map(
    lambda p: K0 * p[0] * np.array([np.cos(p[1]), np.sin(p[1])]))
euler = st.tuples(st.floats(0, 2 * np.pi), st.floats(0.05, np.pi - 0.05), st.floats(0, 2 * np.pi))


class TestChart:
    def test_example(self):
        y = tau(np.array([K0 * np.sqrt(3) / 2, 0.0]), K0)
        assert np.allclose(y, [2 * np.pi * np.sqrt(3), 0.0], atol=1e-13)

    @settings(deadline=None, max_examples=100)
    @given(disk_points)
    def test_roundtrip_and_range(self, k):
        y = tau(k, K0)
        assert np.linalg.norm(y) > K0
        assert np.allclose(tau_inv(y, K0), k, atol=1e-12 * K0)

    def test_domain_errors(self):
        with pytest.raises(OutOfDiskError):
            tau(np.zeros(2), K0)
        with pytest.raises(OutOfDiskError):
            tau_inv(np.array([K0, 0.0]), K0)

    @settings(deadline=None, max_examples=100)
    @given(disk_points)
    def test_chart_is_stereographic_projection_of_sphere(self, k):
        y = stereographic_projection(h_map(k, K0), K0)
        assert np.allclose(y[:2], tau(k, K0), rtol=1e-12)
        assert abs(y[2] + K0) < 1e-12 * K0

    def test_transform_at_nodes(self, phantom, grid32):
        nu = simulate_nu(phantom, random_rotation(np.random.default_rng(5)), None, grid32)
        inner = np.abs(grid32.radii) < 0.9 * K0
        pts = grid32.points[inner]
        assert np.allclose(transform_nu(nu, tau(pts, K0)), nu.values[inner], rtol=1e-12, atol=1e-14)
        assert np.isnan(transform_nu(nu, np.array([0.5 * K0, 0.0])))


class TestLines:
    @settings(deadline=None, max_examples=50)
    @given(euler)
    def test_rotation_inverts_euler(self, e):
        assert np.abs(line_from_euler(e[0], e[1], K0, e[2]).rotation() - euler_to_rotation(e)).max() < 1e-12

    def test_rejects_degenerate_theta(self):
        with pytest.raises(DegenerateInputError):
            line_from_euler(0.1, 0.0, K0)
        with pytest.raises(ValueError):
            LinePair(0.0, np.array([1.0, 0]), np.array([1.0, 0]))

    def test_arcs_map_to_straight_lines(self, rng):
        betas = np.concatenate([np.linspace(-1.5, -0.01, 20), np.linspace(0.01, 1.5, 20)])
        worst = 0.0
        for _ in range(1000):
            Rs, Rt = random_pair(rng)
            for pts in (gamma(Rs, Rt, betas, K0), gamma_dual(Rs, Rt, betas, K0)):
                y = tau(pts, K0)
                worst = max(worst, collinearity_check(y) / np.abs(y).max())
        assert worst < 1e-10

    @settings(deadline=None, max_examples=50)
    @given(euler)
    def test_arcs_land_on_encoded_lines(self, e):
        R = euler_to_rotation(e)
        L = line_from_euler(e[0], e[1], K0, e[2])
        b = np.linspace(-1.2, 1.2, 8)
        ys, yt = tau(gamma(np.eye(3), R, b, K0), K0), tau(gamma(R, np.eye(3), -b, K0), K0)
        scale = np.abs(ys).max() + np.abs(yt).max()
        assert np.abs(ys @ L.w1_s + L.b).max() < 1e-10 * scale
        assert np.abs(yt @ L.w1_t + L.b).max() < 1e-10 * scale
        # primal profiles run in opposite directions
        assert np.abs(ys @ _perp(L.w1_s) + yt @ _perp(L.w1_t)).max() < 1e-10 * scale
        ys, yt = tau(gamma_dual(np.eye(3), R, b, K0), K0), tau(gamma_dual(R, np.eye(3), b, K0), K0)
        scale = np.abs(ys).max() + np.abs(yt).max()
        assert np.abs(ys @ L.w1_s - K0**2 / L.b).max() < 1e-10 * scale
        assert np.abs(ys @ _perp(L.w1_s) - yt @ _perp(L.w1_t)).max() < 1e-10 * scale

    def test_energy_vanishes_on_true_lines(self, phantom, grid64, rng):
        Rs, Rt = random_pair(rng, min_angle=0.3)
        e = rotation_to_euler(Rs.T @ Rt)
        L = line_from_euler(e[0], e[1], K0, e[2])
        a, b = simulate_nu(phantom, Rs, None, grid64), simulate_nu(phantom, Rt, None, grid64)
        true, n = line_energy(a, b, L, 129)
        off, _ = line_energy(a, b, line_from_euler(e[0], e[1] + 0.3, K0, e[2]), 129)
        assert n > 100 and true < 1e-8 and off > 1e3 * true


class TestInfinitesimalRelation:
    def test_analytic_derivatives(self, phantom, grid64, rng):
        for _ in range(5):
            R = random_rotation(rng)
            ell = int(rng.integers(0, 2 * grid64.N))
            w = AngularVelocity(float(rng.uniform(-1.5, 1.5)), float(grid64.angles[ell]), float(rng.uniform(-1, 1)))
            res = check_inf_relation_stereo(analytic_dt_nu(phantom, R, w, grid64), analytic_dphi_nu(phantom, R, grid64),
                                            grid64, w)
            assert res < 1e-5

    def test_zero_velocity(self, phantom, grid64):
        w = AngularVelocity(0.0, 0.0, 0.0)
        dphi = analytic_dphi_nu(phantom, np.eye(3), grid64)
        assert check_inf_relation_stereo(np.zeros(grid64.shape), dphi, grid64, w) == 0.0

    def test_rejects_off_grid_angle(self, grid32):
        with pytest.raises(ValueError):
            check_inf_relation_stereo(np.zeros(grid32.shape), np.zeros(grid32.shape), grid32,
                                      AngularVelocity(1.0, 0.5 * grid32.dphi, 0.0))


@pytest.mark.slow
def test_agrees_with_direct_estimator(phantom, grid32, rng):
    for _ in range(2):
        Rs, Rt = random_pair(rng, min_angle=0.3)
        a, b = simulate_nu(phantom, Rs, None, grid32), simulate_nu(phantom, Rt, None, grid32)
        stereo = estimate_rotation_stereo(a, b)
        direct = estimate_rotation_direct(a, b)
        assert np.linalg.norm(stereo - Rs.T @ Rt) / np.sqrt(3) < 1e-3
        assert np.linalg.norm(stereo - direct) / np.sqrt(3) < 1e-3
