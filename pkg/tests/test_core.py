import json

import numpy as np
import pytest

import squeezeopt as sq
from squeezeopt.core import (
    InvalidParameter,
    conjugacy_residual,
    validate_covariance,
)


class TestValidateParams:
    def test_reference_set_is_valid(self):
        p = sq.SystemParams(g0=4e-5, kappa=0.2, gamma=2e-6, delta_c=1.0, n_bar_m=100.0)
        sq.validate_params(p)  # must not raise

    def test_zero_kappa_rejected(self):
        with pytest.raises(InvalidParameter) as err:
            sq.validate_params(sq.SystemParams(kappa=0.0))
        assert err.value.field_name == "kappa"

    def test_negative_occupation_rejected(self):
        with pytest.raises(InvalidParameter) as err:
            sq.validate_params(sq.SystemParams(n_bar_m=-1.0))
        assert err.value.field_name == "n_bar_m"

    @pytest.mark.parametrize("field,value", [
        ("gamma", -1e-9), ("g0", -1.0), ("omega_m", 0.0), ("delta_c", np.inf),
    ])
    def test_other_constraints(self, field, value):
        with pytest.raises(InvalidParameter) as err:
            sq.validate_params(sq.SystemParams(**{field: value}))
        assert err.value.field_name == field


class TestThermalInitialMoments:
    def test_hot_bath(self):
        x = sq.thermal_initial_moments(sq.SystemParams(n_bar_m=100.0))
        assert x[1] == 100.0
        assert np.all(x[np.arange(10) != 1] == 0.0)

    def test_vacuum(self):
        x = sq.thermal_initial_moments(sq.SystemParams(n_bar_m=0.0))
        assert np.all(x == 0.0)

    def test_fractional_occupation(self):
        x = sq.thermal_initial_moments(sq.SystemParams(n_bar_m=0.5))
        assert x[1] == 0.5

    def test_invariants_hold_exactly(self):
        x = sq.thermal_initial_moments(sq.SystemParams(n_bar_m=7.25))
        sq.validate_moments(x, tol_scale=0.0)
        assert conjugacy_residual(x) == 0.0


class TestPulse:
    def test_basic_shape(self):
        p = sq.Pulse(2.0, np.ones(4), np.zeros(4))
        p.validate()
        assert p.n_bins == 4
        assert p.bin_width == 0.5
        assert np.allclose(p.bin_edges, [0.0, 0.5, 1.0, 1.5])

    def test_too_few_bins(self):
        with pytest.raises(InvalidParameter):
            sq.Pulse(1.0, np.ones(1), np.zeros(1)).validate()

    def test_length_mismatch(self):
        with pytest.raises(InvalidParameter):
            sq.Pulse(1.0, np.ones(4), np.zeros(3)).validate()

    def test_negative_amplitude_allowed(self):
        sq.Pulse(1.0, np.array([-1.0, 2.0]), np.zeros(2)).validate()

    def test_arrays_read_only(self):
        p = sq.Pulse(1.0, np.ones(4), np.zeros(4))
        with pytest.raises(ValueError):
            p.omega[0] = 3.0


class TestSerialization:
    def test_params_json_round_trip_bit_stable(self):
        p = sq.SystemParams(g0=4e-5, kappa=0.2, gamma=2e-6, delta_c=1.0,
                            n_bar_m=100.0)
        blob = json.dumps(p.to_dict())
        q = sq.SystemParams.from_dict(json.loads(blob))
        assert p == q
        assert json.dumps(q.to_dict()) == blob

    def test_pulse_json_round_trip_bit_stable(self):
        rng = np.random.default_rng(5)
        p = sq.Pulse(1.7, rng.standard_normal(10) * 1e3, rng.standard_normal(10))
        q = sq.Pulse.from_dict(json.loads(json.dumps(p.to_dict())))
        assert q.t_final == p.t_final
        assert np.array_equal(q.omega, p.omega)
        assert np.array_equal(q.phi, p.phi)


class TestMomentValidation:
    def test_conjugacy_violation_detected(self):
        x = np.zeros(10, dtype=complex)
        x[4] = 1.0  # <adag adag> without matching <a a>
        with pytest.raises(InvalidParameter):
            sq.validate_moments(x)

    def test_negative_occupation_detected(self):
        x = np.zeros(10, dtype=complex)
        x[0] = -1.0
        with pytest.raises(InvalidParameter):
            sq.validate_moments(x)

    def test_tolerance_scales_with_norm(self):
        x = np.zeros(10, dtype=complex)
        x[1] = 1e6
        x[9] = 1.0 + 1e-5j
        x[6] = 1.0 - 1e-5j  # drift small relative to the norm
        sq.validate_moments(x)


class TestCovariance:
    def test_vacuum_symplectic_eigenvalues(self):
        nu = sq.symplectic_eigenvalues(0.5 * np.eye(4))
        assert np.allclose(nu, [0.5, 0.5])

    def test_thermal_eigenvalues(self):
        v = np.diag([3.5, 3.5, 0.5, 0.5])
        nu = sq.symplectic_eigenvalues(v)
        assert np.allclose(sorted(nu), [0.5, 3.5])

    def test_below_vacuum_rejected(self):
        with pytest.raises(sq.SqueezeOptError):
            validate_covariance(0.4 * np.eye(4))

    def test_asymmetric_rejected(self):
        v = 0.5 * np.eye(4)
        v[0, 1] = 0.3
        with pytest.raises(InvalidParameter):
            validate_covariance(v)
