import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import squeezeopt as sq
from squeezeopt.analysis import (
    heisenberg_products,
    moments_from_covariance,
    optimal_angle,
    SqueezingReport,
)
from squeezeopt.core import DomainError, NonphysicalCovariance, SingularCovariance

from conftest import random_physical_moments


class TestCovarianceFromMoments:
    def test_thermal_block_is_isotropic(self):
        x = np.zeros(10, complex)
        x[1] = 3.0
        v = sq.covariance_from_moments(x)
        assert np.allclose(v[2:, 2:], 3.5 * np.eye(2))
        assert np.allclose(v[:2, :2], 0.5 * np.eye(2))

    def test_squeezed_entries(self):
        x = np.zeros(10, complex)
        x[1] = 0.5
        x[9] = 0.3
        x[6] = 0.3
        v = sq.covariance_from_moments(x)
        assert v[2, 2] == pytest.approx(1.3)
        assert v[3, 3] == pytest.approx(0.7)
        assert v[2, 3] == pytest.approx(0.0)

    def test_vacuum(self):
        v = sq.covariance_from_moments(np.zeros(10, complex))
        assert np.allclose(v, 0.5 * np.eye(4))

    def test_nonphysical_rejected(self):
        x = np.zeros(10, complex)
        x[9] = 0.4  # |<bb>| > <bdag b> + 1/2 impossible
        x[6] = 0.4
        with pytest.raises(NonphysicalCovariance):
            sq.covariance_from_moments(x)

    def test_round_trip_with_inverse(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            x = random_physical_moments(rng)
            v = sq.covariance_from_moments(x, check=False)
            assert np.allclose(moments_from_covariance(v), x, atol=1e-12)


class TestQuadratureVariance:
    def test_axis_aligned_angles(self):
        v = np.diag([0.5, 0.5, 1.0, 2.0])
        assert sq.quadrature_variance(v, 0.0) == pytest.approx(1.0)
        assert sq.quadrature_variance(v, math.pi / 2) == pytest.approx(2.0)

    def test_diagonal_mixing(self):
        v = np.diag([0.5, 0.5, 1.0, 2.0]).astype(float)
        v[2, 3] = v[3, 2] = 0.5
        assert sq.quadrature_variance(v, math.pi / 4) == pytest.approx(2.0)


class TestSqueezingDegree:
    def test_zero_point_reference(self):
        assert sq.squeezing_degree(0.5) == 0.0

    def test_three_db(self):
        assert sq.squeezing_degree(0.25) == pytest.approx(3.0103, abs=1e-4)

    def test_one_db_endpoint(self):
        assert sq.squeezing_degree(0.397) == pytest.approx(1.002, abs=1e-3)

    def test_domain(self):
        with pytest.raises(DomainError):
            sq.squeezing_degree(0.0)

    def test_inverse(self):
        for db in (0.0, 1.0, 3.2):
            assert sq.squeezing_degree(sq.variance_from_degree(db)) == pytest.approx(db)


class TestMechanismVariance:
    def test_no_anomalous_moment_means_no_squeezing(self):
        x = np.zeros(10, complex)
        x[1] = 0.7
        for th in np.linspace(0, np.pi, 13):
            var, squeezed = sq.mechanism_variance(x, th)
            assert var == pytest.approx(1.2)
            assert not squeezed

    def test_real_anomalous_moment(self):
        x = np.zeros(10, complex)
        x[1] = 0.2
        x[6] = 0.3
        x[9] = 0.3
        var, squeezed = sq.mechanism_variance(x, math.pi / 2)
        assert var == pytest.approx(0.4)
        assert squeezed

    def test_identity_with_covariance_route(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(1000):
            x = random_physical_moments(rng)
            th = rng.uniform(0, 2 * np.pi)
            via_cov = sq.quadrature_variance(sq.covariance_from_moments(x, check=False), th)
            direct, _ = sq.mechanism_variance(x, th)
            worst = max(worst, abs(via_cov - direct))
        assert worst <= 1e-12

    def test_rotational_extrema(self):
        rng = np.random.default_rng(5)
        x = random_physical_moments(rng)
        thetas = np.linspace(0, np.pi, 20001)
        vals = np.array([sq.mechanism_variance(x, th)[0] for th in thetas])
        spread = vals.max() - vals.min()
        assert spread == pytest.approx(2 * abs(x[9]), rel=1e-6)
        # the theta grid brackets the true minimum to second order
        assert vals.min() == pytest.approx(sq.minimum_variance(x), rel=1e-6)
        th_star = optimal_angle(x)
        v_min, _ = sq.mechanism_variance(x, th_star)
        v_max, _ = sq.mechanism_variance(x, th_star + math.pi / 2)
        assert v_min == pytest.approx(vals.min(), rel=1e-9)
        assert v_max == pytest.approx(vals.max(), rel=1e-9)


class TestSqueezingReport:
    def test_degree_consistency(self):
        x = np.zeros(10, complex)
        x[1] = 0.2
        x[6] = x[9] = 0.3
        rep = SqueezingReport.from_moments(x, math.pi / 2)
        assert rep.degree_db == pytest.approx(-10 * math.log10(rep.variance / 0.5))
        assert rep.variance > 0
        assert rep.mean_phonon == pytest.approx(0.2)


class TestWigner:
    def test_vacuum_peak(self):
        w = sq.wigner(0.5 * np.eye(2), n_points=41)
        mid = w.values[20, 20]
        assert mid == pytest.approx(1 / math.pi, rel=1e-12)

    def test_thermal_peak(self):
        w = sq.wigner(100.5 * np.eye(2), n_points=41)
        assert w.values[20, 20] == pytest.approx(1 / (2 * math.pi * 100.5), rel=1e-12)

    def test_pointwise_squeezed_value(self):
        # independent scalar evaluation of the Gaussian at one phase-space point
        vb = np.diag([0.2394, 1.1])
        w = sq.wigner(vb, n_points=201, half_width=5.0)
        # D = (0, 1): exponent -1/(2*1.1), prefactor (2 pi sqrt(det))^-1
        expected = math.exp(-1.0 / (2 * 1.1)) / (2 * math.pi * math.sqrt(0.2394 * 1.1))
        i = 100  # D_R = 0
        j = 120  # D_I = 1.0 on the (-5, 5) 201-point grid
        assert w.grid_im[j] == pytest.approx(1.0)
        assert w.values[i, j] == pytest.approx(expected, rel=1e-12)

    def test_normalization(self):
        vb = np.array([[0.3, 0.1], [0.1, 1.5]])
        w = sq.wigner(vb)
        assert abs(w.normalization() - 1.0) < 0.01

    def test_marginal_matches_position_variance(self):
        vb = np.array([[0.8, 0.25], [0.25, 1.9]])
        w = sq.wigner(vb, n_points=401)
        di = w.grid_im[1] - w.grid_im[0]
        marginal = w.values.sum(axis=1) * di
        dr = w.grid_re[1] - w.grid_re[0]
        mass = marginal.sum() * dr
        var = (marginal * w.grid_re ** 2).sum() * dr / mass
        assert var == pytest.approx(vb[0, 0], rel=0.01)

    def test_singular_covariance_rejected(self):
        with pytest.raises(SingularCovariance):
            sq.wigner(np.zeros((2, 2)))

    def test_accepts_full_covariance(self):
        x = np.zeros(10, complex)
        x[1] = 2.0
        v = sq.covariance_from_moments(x)
        w = sq.wigner(v, n_points=31)
        assert w.values.max() == pytest.approx(1 / (2 * math.pi * 2.5), rel=1e-12)


class TestHeisenberg:
    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_uncertainty_products_bounded(self, seed):
        rng = np.random.default_rng(seed)
        x = random_physical_moments(rng)
        products = heisenberg_products(x, n_angles=64)
        assert products.min() >= 0.25 - 1e-9
