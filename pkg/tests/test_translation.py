import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from odtmotion.arcs import beta_grid, gamma, sigma
from odtmotion.errors import InsufficientAmplitudeError, RankDeficiencyError
from odtmotion.forward import AnalyticMu, PolarGrid, simulate_mu
from odtmotion.phantom import single_ball
from odtmotion.so3 import axis_rotation_y, axis_rotation_z, random_rotation, rodrigues_exp
from odtmotion.translation import (PhaseSystem, build_phase_system, central_run, degenerate_angle, estimate_translation,
                                   estimate_translation_pair, estimate_translations, optical_center, phase_unwrap,
                                   solve_relative_shift)

from conftest import K0, random_pair


def analytic(ph, R, d, grid):
    return AnalyticMu(ph, np.asarray(R, float), np.asarray(d, float), grid)


class TestUnwrap:
    def test_example(self):
        out = phase_unwrap([0.0, 0.1, 6.2])
        assert np.allclose(out, [0.0, 0.1, 6.2 - 2 * np.pi], atol=1e-15)

    def test_from_center_anchor(self):
        # anchor reduced to (-pi, pi], neighbors follow it in both directions
        out = phase_unwrap([3.0, 3.1, 3.2 + 2 * np.pi, 3.3], anchor=2)
        assert np.allclose(out, np.array([3.0, 3.1, 3.2, 3.3]) - 2 * np.pi)

    @settings(deadline=None, max_examples=50)
    @given(st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=30), st.integers(-3, 3), st.data())
    def test_recovers_linear_phase(self, steps, shift, data):
        # a sequence whose increments are below pi comes back exactly up to one 2 pi shift
        seq = np.cumsum(np.asarray(steps)) * 0.9
        anchor = data.draw(st.integers(0, len(seq) - 1))
        seq -= seq[anchor]
        wrapped = np.angle(np.exp(1j * seq)) + 2 * np.pi * shift
        assert np.allclose(phase_unwrap(wrapped, anchor), seq, atol=1e-9)

    def test_empty(self):
        assert phase_unwrap([]).size == 0

    def test_central_run(self):
        ok = np.array([True, False, True, True, True, False, True])
        assert central_run(ok, 3) == slice(2, 5)
        with pytest.raises(InsufficientAmplitudeError):
            central_run(ok, 1)


class TestPhaseSystem:
    def test_phase_identity_on_arcs(self, phantom, grid64, rng):
        for _ in range(5):
            Rs, Rt = random_pair(rng)
            ds, dt = rng.normal(size=3), rng.normal(size=3)
            b = beta_grid(grid64.N)
            ks, kt = gamma(Rs, Rt, b, K0), gamma(Rt, Rs, -b, K0)
            ratio = analytic(phantom, Rs, ds, grid64)(ks) / analytic(phantom, Rt, dt, grid64)(kt)
            expect = np.exp(1j * sigma(Rs, Rt, b, K0) @ (Rt @ dt - Rs @ ds))
            ok = np.isfinite(ratio)
            assert np.abs(ratio[ok] - expect[ok]).max() < 1e-9

    def test_zero_shift_gives_zero_rhs(self, phantom, grid64, rng):
        Rs, Rt = random_pair(rng)
        for sys_ in build_phase_system(analytic(phantom, Rs, np.zeros(3), grid64), analytic(phantom, Rt, np.zeros(3), grid64), Rs, Rt):
            assert np.abs(sys_.rhs).max() < 1e-10

    def test_rhs_is_projection_of_relative_shift(self, phantom, grid64, rng):
        Rs, Rt = random_pair(rng)
        dt = np.array([1.5, -2.0, 0.7])
        x = Rt @ dt
        for sys_ in build_phase_system(analytic(phantom, Rs, np.zeros(3), grid64), analytic(phantom, Rt, dt, grid64), Rs, Rt):
            assert len(sys_) > 10
            assert np.abs(sys_.rhs - sys_.directions @ x).max() < 1e-8

    def test_solver_matches_svd_oracle(self, rng):
        A = rng.normal(size=(40, 3))
        y = rng.normal(size=40)
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
        oracle = Vt.T @ ((U.T @ y) / s)
        x = solve_relative_shift([PhaseSystem(A[:25], y[:25], "primal"), PhaseSystem(A[25:], y[25:], "dual")])
        assert np.allclose(x, oracle, atol=1e-12)

    def test_solver_rank_checks(self):
        A = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]])
        with pytest.raises(RankDeficiencyError):
            solve_relative_shift([PhaseSystem(A, np.zeros(3), "primal")])
        with pytest.raises(InsufficientAmplitudeError):
            solve_relative_shift([PhaseSystem(np.zeros((0, 3)), np.zeros(0), "primal")])

    def test_dual_arc_completes_the_rank(self, phantom, grid64, rng):
        # each arc lies in a plane through 0; together they span R^3
        for _ in range(10):
            Rs, Rt = random_pair(rng, min_angle=0.2)
            systems = build_phase_system(analytic(phantom, Rs, np.zeros(3), grid64),
                                         analytic(phantom, Rt, np.zeros(3), grid64), Rs, Rt)
            for sys_ in systems:
                sv = np.linalg.svd(sys_.directions, compute_uv=False)
                assert sv[1] > 1e-2 * sv[0] and sv[2] < 1e-12 * sv[0]
            sv = np.linalg.svd(np.concatenate([s.directions for s in systems]), compute_uv=False)
            assert sv[2] > 1e-2 * sv[0]


class TestEstimateTranslation:
    def test_random_pairs(self, phantom, grid64, rng):
        worst = 0.0
        for _ in range(100):
            Rs, Rt = random_pair(rng)
            ds, dt = rng.uniform(-3, 3, size=3), rng.uniform(-3, 3, size=3)
            est = estimate_translation(analytic(phantom, Rs, ds, grid64), analytic(phantom, Rt, dt, grid64), Rs, Rt, ds)
            worst = max(worst, np.linalg.norm(est - dt))
        assert worst < 1e-6

    def test_interpolated_frames(self, phantom, grid64, rng):
        Rs, Rt = random_pair(rng, min_angle=0.3)
        dt = np.array([1.0, -0.5, 2.0])
        est = estimate_translation(simulate_mu(phantom, Rs, None, grid64), simulate_mu(phantom, Rt, dt, grid64), Rs, Rt)
        assert np.linalg.norm(est - dt) < 1e-3

    @pytest.mark.parametrize("reflected", [False, True])
    def test_degenerate_pair(self, phantom, grid64, rng, reflected):
        Rs = random_rotation(rng)
        Rt = Rs @ (axis_rotation_y(np.pi) if reflected else np.eye(3)) @ axis_rotation_z(np.pi / 4)
        alpha, refl = degenerate_angle(Rs, Rt)
        assert abs(alpha - np.pi / 4) < 1e-12 and refl == reflected
        d = np.array([1.0, 0.0, 2.0])
        est = estimate_translation_pair(simulate_mu(phantom, Rs, None, grid64), simulate_mu(phantom, Rt, d, grid64),
                                        Rs, Rt)
        assert np.linalg.norm(est - d) < 1e-6

    def test_degenerate_off_grid_angle(self, phantom, grid64):
        Rt = axis_rotation_z(0.3)
        d = np.array([-1.0, 0.5, 1.0])
        est = estimate_translation_pair(simulate_mu(phantom, np.eye(3), None, grid64),
                                        simulate_mu(phantom, Rt, d, grid64), np.eye(3), Rt)
        assert np.linalg.norm(est - d) < 1e-3

    @pytest.mark.parametrize("consecutive", [False, True])
    def test_sequence(self, phantom, grid32, consecutive):
        axis = np.array([0.6, 0.0, 0.8])
        ts = np.linspace(0, 1.0, 5)
        Rs = [rodrigues_exp(axis, t) for t in ts]
        ds = [np.array([np.sin(t), 0.5 * t, -t]) for t in ts]
        mus = [analytic(phantom, R, d, grid32) for R, d in zip(Rs, ds)]
        est = estimate_translations(mus, Rs, consecutive=consecutive)
        assert np.abs(est - np.array(ds)).max() < 1e-6


class TestOpticalCenter:
    ROTS = [np.eye(3), axis_rotation_y(np.pi / 2), rodrigues_exp(np.array([1.0, 0, 0]), np.pi / 2)]

    def frames(self, ph, grid, shifts):
        return [(simulate_mu(ph, R, d, grid), R, d) for R, d in zip(self.ROTS, shifts)]

    def test_centered_ball(self, grid64):
        ph = single_ball(radius=0.8)
        C = optical_center(self.frames(ph, grid64, [np.zeros(3)] * 3))
        assert np.linalg.norm(C) < 1e-10

    @pytest.mark.parametrize("with_shift", [False, True])
    def test_off_center(self, grid64, with_shift):
        c = np.array([0.3, -0.2, 0.15])
        ph = single_ball(center=c, radius=0.8)
        shifts = [np.array([0.5, -1.0, 0.2]), np.array([0.0, 0.4, 1.0]), np.array([-0.7, 0.0, 0.3])]
        C = optical_center(self.frames(ph, grid64, shifts if with_shift else [np.zeros(3)] * 3))
        assert np.linalg.norm(C - ph.optical_center()) < 1e-4

    def test_needs_two_viewing_directions(self, grid64):
        ph = single_ball(radius=0.8)
        frames = [(simulate_mu(ph, R, None, grid64), R, None) for R in (np.eye(3), axis_rotation_z(1.0))]
        with pytest.raises(RankDeficiencyError):
            optical_center(frames)
