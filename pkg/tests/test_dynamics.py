import numpy as np
import pytest
from scipy.linalg import expm

import squeezeopt as sq
from squeezeopt.core import NumericalOverflow
from squeezeopt.dynamics import MeanFieldTrajectory


def frozen_trajectory(alpha_c, beta_c, template: MeanFieldTrajectory):
    """Synthetic trajectory with constant mean fields (constant-coefficient
    checks)."""
    return MeanFieldTrajectory(
        grid=template.grid,
        alpha=np.full_like(template.alpha, alpha_c),
        beta=np.full_like(template.beta, beta_c),
        pulse=template.pulse,
        steps_per_bin=template.steps_per_bin,
    )


# -- drift matrix ------------------------------------------------------------

class TestDriftMatrix:
    def test_uncoupled_is_block_diagonal(self, params):
        m = sq.drift_matrix(sq.MeanFieldState(0.0, 0.0), params)
        diag = np.diag(m).copy()
        assert np.count_nonzero(m - np.diag(diag)) == 0
        kap, gam, dc, om = params.kappa, params.gamma, params.delta_c, params.omega_m
        k1 = 1j * (dc - om) - 0.5 * (kap + gam)
        k2 = 2j * dc - kap
        k3 = 1j * (dc + om) - 0.5 * (kap + gam)
        k4 = 2j * om - gam
        expected = np.array([-kap, -gam, k1, np.conj(k1), k2, k3, k4,
                             np.conj(k2), np.conj(k3), np.conj(k4)])
        assert np.allclose(diag, expected, atol=1e-15)

    def test_k1_value(self):
        p = sq.SystemParams(g0=0.0, kappa=0.2, gamma=0.0, delta_c=1.0)
        m = sq.drift_matrix(sq.MeanFieldState(0.0, 0.0), p)
        assert m[2, 2] == pytest.approx(-0.1, abs=1e-15)
        assert m[2, 2].imag == pytest.approx(0.0, abs=1e-15)

    def test_k4_value(self):
        p = sq.SystemParams(gamma=2e-6)
        m = sq.drift_matrix(sq.MeanFieldState(0.0, 0.0), p)
        assert m[6, 6] == pytest.approx(2j - 2e-6, abs=1e-18)

    def test_matches_published_blocks_where_consistent(self, params):
        # The printed coefficient blocks leave the <a b> row's coupling to
        # <b b> out; conjugation symmetry of the pair (<adag bdag>, <a b>)
        # requires it, and every other entry agrees.
        alpha = 1.3 - 0.4j
        beta = 0.7 + 0.2j
        p = params
        g = p.g0 * alpha
        ig, igc = 1j * g, 1j * np.conj(g)
        delta = p.delta_c + 2 * p.g0 * beta.real
        k1 = 1j * (delta - p.omega_m) - 0.5 * (p.kappa + p.gamma)
        k2 = 2j * delta - p.kappa
        k3 = 1j * (delta + p.omega_m) - 0.5 * (p.kappa + p.gamma)
        k4 = 2j * p.omega_m - p.gamma
        z = 0.0
        printed = np.array([
            [-p.kappa, z, -ig, igc, z, -ig, z, z, igc, z],
            [z, -p.gamma, ig, -igc, z, -ig, z, z, igc, z],
            [-igc, igc, k1, z, -ig, z, z, z, z, igc],
            [ig, -ig, z, np.conj(k1), z, z, -ig, igc, z, z],
            [z, z, 2 * igc, z, k2, 2 * igc, z, z, z, z],
            [igc, igc, z, z, ig, k3, igc, z, z, z],
            [z, z, z, 2 * igc, z, 2 * ig, k4, z, z, z],
            [z, z, z, -2 * ig, z, z, z, np.conj(k2), -2 * ig, z],
            [-ig, -ig, z, z, z, z, z, -igc, np.conj(k3), z],
            [z, z, -2 * ig, z, z, z, z, z, -2 * igc, np.conj(k4)],
        ])
        ours = sq.drift_matrix(sq.MeanFieldState(alpha, beta), params)
        mismatch = np.argwhere(~np.isclose(ours, printed, atol=1e-15))
        assert mismatch.tolist() == [[8, 9]]
        assert ours[8, 9] == pytest.approx(-ig, abs=1e-18)

    def test_conjugation_symmetry(self, params):
        # d/dt of a moment's conjugate must equal the conjugate of d/dt.
        perm = np.array([0, 1, 3, 2, 7, 8, 9, 4, 5, 6])  # index of conj(x_i)
        m = sq.drift_matrix(sq.MeanFieldState(0.3 + 1.1j, -0.2j), params)
        for i in range(10):
            for j in range(10):
                assert m[perm[i], perm[j]] == pytest.approx(np.conj(m[i, j]), abs=1e-16)


class TestInhomogeneousTerm:
    def test_undriven_thermal_pump(self):
        p = sq.SystemParams(gamma=2e-6, n_bar_m=100.0)
        n = sq.inhomogeneous_term(sq.MeanFieldState(0.0, 0.0), p)
        assert n[1] == pytest.approx(2e-4, rel=1e-12)
        assert np.count_nonzero(np.delete(n, 1)) == 0

    def test_coupling_constants(self):
        p = sq.SystemParams(g0=4e-5, gamma=0.0)
        n = sq.inhomogeneous_term(sq.MeanFieldState(1.0 + 0.0j, 0.0), p)
        assert n[5] == pytest.approx(4e-5j, abs=1e-20)
        assert n[8] == pytest.approx(-4e-5j, abs=1e-20)

    def test_zero_case(self):
        p = sq.SystemParams(n_bar_m=0.0)
        n = sq.inhomogeneous_term(sq.MeanFieldState(0.0, 0.0), p)
        assert np.all(n == 0.0)


# -- mean-field integration --------------------------------------------------

class TestMeanField:
    def test_undriven_origin_is_fixed_point(self, params):
        pulse = sq.Pulse(2.0, np.zeros(10), np.zeros(10))
        traj = sq.integrate_meanfield(pulse, params, steps_per_bin=5)
        assert np.all(traj.alpha == 0.0)
        assert np.all(traj.beta == 0.0)

    def test_constant_drive_closed_form(self):
        p = sq.SystemParams(g0=0.0, kappa=0.2, delta_c=1.0)
        om = 3.0
        pulse = sq.Pulse(2.0, np.full(40, om), np.zeros(40))
        traj = sq.integrate_meanfield(pulse, p, steps_per_bin=10)
        lam = 1j * p.delta_c + p.kappa / 2
        exact = 1j * om * (1.0 - np.exp(-lam * traj.grid)) / lam
        rel = np.abs(traj.alpha - exact).max() / np.abs(exact).max()
        assert rel < 1e-8

    def test_driven_oscillator_center(self):
        # With a settled cavity the mechanical orbit circles -g0 |alpha|^2 / omega_m.
        p = sq.SystemParams(g0=1e-4, kappa=2.0, gamma=0.0, delta_c=0.0, n_bar_m=0.0)
        om = 50.0
        pulse = sq.Pulse(40.0, np.full(400, om), np.zeros(400))
        traj = sq.integrate_meanfield(pulse, p, steps_per_bin=5)
        alpha_ss = 1j * om / (1j * p.delta_c + p.kappa / 2)
        center = -p.g0 * abs(alpha_ss) ** 2 / p.omega_m
        # average over the last full mechanical period
        period_pts = int(round(2 * np.pi / (traj.grid[1] - traj.grid[0])))
        measured = traj.beta[-period_pts:].mean()
        assert abs(measured - center) / abs(center) < 1e-3

    def test_overflow_guard(self, params):
        pulse = sq.Pulse(2.0, np.full(10, 1e13), np.zeros(10))
        with pytest.raises(NumericalOverflow):
            sq.integrate_meanfield(pulse, params, steps_per_bin=5)


# -- moment integration ------------------------------------------------------

class TestMoments:
    def test_thermal_equilibrium_is_stationary(self, params):
        pulse = sq.Pulse(5.0, np.zeros(10), np.zeros(10))
        traj = sq.integrate_meanfield(pulse, params, steps_per_bin=10)
        x0 = sq.thermal_initial_moments(params)
        m = sq.integrate_moments(traj, params, x0)
        assert np.allclose(m.moments[:, 1], params.n_bar_m, rtol=1e-12)
        assert np.abs(m.moments[:, 0]).max() == 0.0

    def test_relaxation_to_bath(self):
        p = sq.SystemParams(g0=0.0, gamma=0.05, n_bar_m=100.0)
        pulse = sq.Pulse(2.0, np.zeros(10), np.zeros(10))
        traj = sq.integrate_meanfield(pulse, p, steps_per_bin=20)
        m = sq.integrate_moments(traj, p, np.zeros(10, complex))
        expected = 100.0 * (1.0 - np.exp(-0.05 * m.grid))
        assert np.abs(m.moments[:, 1].real - expected).max() < 1e-10

    def test_conjugacy_preserved_along_trajectory(self, params):
        t_final, n_bins = 120.0, 240
        t = np.arange(n_bins) * (t_final / n_bins)
        pulse = sq.Pulse(t_final, 2e3 * (1 + 0.5 * np.sin(2 * np.pi * t / t_final)),
                         0.8 * np.sin(4 * np.pi * t / t_final))
        traj = sq.integrate_meanfield(pulse, params, steps_per_bin=100)
        m = sq.integrate_moments(traj, params, sq.thermal_initial_moments(params))
        from squeezeopt.core import conjugacy_residual

        worst = max(conjugacy_residual(m.moments[i])
                    / (1.0 + np.linalg.norm(m.moments[i]))
                    for i in range(0, m.grid.shape[0], 10))
        assert worst < 1e-9

    def test_rk4_order_by_step_halving(self, params):
        t_final, n_bins = 2.0, 8
        t = np.arange(n_bins) * (t_final / n_bins)
        pulse = sq.Pulse(t_final, 1e3 * (1 + np.cos(np.pi * t)), 0.3 * np.sin(np.pi * t))
        x0 = sq.thermal_initial_moments(params)

        def final(spb):
            traj = sq.integrate_meanfield(pulse, params, steps_per_bin=spb)
            return sq.integrate_moments(traj, params, x0).final

        e1 = np.linalg.norm(final(4) - final(8))
        e2 = np.linalg.norm(final(8) - final(16))
        assert 10.0 < e1 / e2 < 22.0  # 4th order gives ~16


# -- propagators ---------------------------------------------------------------

class TestMomentPropagator:
    def test_final_point_is_identity(self, params, small_pulse):
        traj = sq.integrate_meanfield(small_pulse, params, steps_per_bin=5)
        pg = sq.propagator_moments(traj, params)
        assert np.allclose(pg.mats[-1], np.eye(10), atol=1e-15)

    def test_constant_coefficients_match_expm(self, params, small_pulse):
        traj = sq.integrate_meanfield(small_pulse, params, steps_per_bin=5)
        frozen = frozen_trajectory(250.0 + 100.0j, -30.0 + 5.0j, traj)
        pg = sq.propagator_moments(frozen, params)
        m = sq.drift_matrix(sq.MeanFieldState(250.0 + 100.0j, -30.0 + 5.0j), params)
        for idx in (0, 41, 77):
            s = frozen.moment_grid[idx]
            exact = expm(m * (small_pulse.t_final - s))
            err = np.abs(pg.mats[idx] - exact).max() / np.abs(exact).max()
            assert err < 1e-8

    def test_semigroup_composition(self, params):
        # Phi(T, 0) over the full pulse equals Phi(T, m) @ Phi(m, 0) from
        # two half-interval runs.
        cfg = sq.OptimizerConfig(seed=9)
        pulse = sq.random_smooth_pulse(cfg, 1.0, 20)
        p = params
        traj = sq.integrate_meanfield(pulse, p, steps_per_bin=10)
        full = sq.propagator_moments(traj, p).mats[0]

        first = sq.Pulse(0.5, pulse.omega[:10], pulse.phi[:10])
        second = sq.Pulse(0.5, pulse.omega[10:], pulse.phi[10:])
        traj1 = sq.integrate_meanfield(first, p, steps_per_bin=10)
        phi_m0 = sq.propagator_moments(traj1, p).mats[0]
        traj2 = sq.integrate_meanfield(second, p, mf0=traj1.final_state,
                                       steps_per_bin=10)
        phi_tm = sq.propagator_moments(traj2, p).mats[0]
        composed = phi_tm @ phi_m0
        assert np.abs(full - composed).max() < 1e-7

    def test_stride_storage(self, params, small_pulse):
        traj = sq.integrate_meanfield(small_pulse, params, steps_per_bin=5)
        dense = sq.propagator_moments(traj, params)
        sparse = sq.propagator_moments(traj, params, stride=5)
        assert sparse.mats.shape[0] == 21
        assert np.allclose(sparse.mats[3], dense.mats[15], atol=1e-14)


class TestMeanFieldPropagator:
    def test_identity_at_origin(self, params, small_pulse):
        traj = sq.integrate_meanfield(small_pulse, params, steps_per_bin=5)
        lp = sq.propagator_meanfield(traj, params)
        assert np.allclose(lp.mats[0], np.eye(4), atol=1e-15)
        assert np.allclose(lp.inverses[0], np.eye(4), atol=1e-15)

    def test_uncoupled_closed_form(self):
        p = sq.SystemParams(g0=0.0, kappa=0.2, gamma=1e-3, delta_c=1.0)
        pulse = sq.Pulse(2.0, np.full(20, 5.0), np.zeros(20))
        traj = sq.integrate_meanfield(pulse, p, steps_per_bin=10)
        lp = sq.propagator_meanfield(traj, p)
        t = traj.moment_grid
        for idx in (7, 133, 200):
            lam_a = np.exp(-(1j * p.delta_c + p.kappa / 2) * t[idx])
            lam_b = np.exp(-(1j * p.omega_m + p.gamma / 2) * t[idx])
            expected = np.diag([lam_a, lam_b, np.conj(lam_a), np.conj(lam_b)])
            assert np.abs(lp.mats[idx] - expected).max() < 1e-9

    def test_inverse_consistency(self, params, small_pulse):
        traj = sq.integrate_meanfield(small_pulse, params, steps_per_bin=10)
        lp = sq.propagator_meanfield(traj, params)
        lp.validate(tol=1e-8)
