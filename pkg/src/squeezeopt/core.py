"""Domain types, unit conventions, and validation shared across the package.

Units: the mechanical frequency sets the time scale, so every rate
(``g0``, ``kappa``, ``gamma``, ``delta_c``, drive amplitudes) is expressed
as a multiple of ``omega_m`` and every time in units of ``1/omega_m``.
``hbar = 1`` throughout; the zero-point quadrature variance is 1/2.

Second-order moments of the two fluctuation modes are carried as length-10
complex vectors with the fixed ordering

    0: <adag a>    1: <bdag b>    2: <adag b>     3: <a bdag>
    4: <adag adag> 5: <adag bdag> 6: <bdag bdag>  7: <a a>
    8: <a b>       9: <b b>

(`a` cavity, `b` mechanics, both in the displaced frame where first
moments vanish). Quadrature covariance matrices are real 4x4 arrays over
(Xa, Ya, Xb, Yb).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

MOMENT_LABELS = (
    "adag_a",
    "bdag_b",
    "adag_b",
    "a_bdag",
    "adag_adag",
    "adag_bdag",
    "bdag_bdag",
    "a_a",
    "a_b",
    "b_b",
)

# Conjugate pairs within the moment vector: x[j] == conj(x[i]).
CONJUGATE_PAIRS = ((7, 4), (9, 6), (3, 2), (8, 5))


class SqueezeOptError(Exception):
    """Base class for all package errors."""


class InvalidParameter(SqueezeOptError):
    """A physical parameter violates its constraint."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"invalid-parameter ({field_name}): {message}")
        self.field_name = field_name


class NumericalOverflow(SqueezeOptError):
    """A trajectory left the representable range (|amplitude| > 1e12)."""


class IllConditioned(SqueezeOptError):
    """A propagator norm exceeded the conditioning guard (1e14)."""


class NonphysicalCovariance(SqueezeOptError):
    """A covariance matrix has a symplectic eigenvalue below 1/2."""


class SingularCovariance(SqueezeOptError):
    """Covariance determinant too small for a Wigner evaluation."""


class TruncationBreach(SqueezeOptError):
    """Fock-space truncation accumulated non-negligible edge population."""


class DomainError(SqueezeOptError):
    """Argument outside the mathematical domain of an operation."""


@dataclass(frozen=True)
class SystemParams:
    """Physical rates and occupations, all scaled by the mechanical frequency.

    Defaults are the standard experimentally-motivated set used throughout
    the bundled configurations: weak single-photon coupling, moderately
    resolved sideband, high-Q mechanics at 100 thermal phonons.
    """

    g0: float = 4e-5
    kappa: float = 0.2
    gamma: float = 2e-6
    delta_c: float = 1.0
    n_bar_m: float = 100.0
    omega_m: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        return cls(**{k: float(d[k]) for k in cls.__dataclass_fields__ if k in d})


def validate_params(p: SystemParams) -> None:
    """Raise :class:`InvalidParameter` unless every parameter constraint holds."""
    if not np.isfinite(p.omega_m) or p.omega_m <= 0:
        raise InvalidParameter("omega_m", "must be positive")
    if not np.isfinite(p.kappa) or p.kappa <= 0:
        raise InvalidParameter("kappa", "must be positive")
    if not np.isfinite(p.gamma) or p.gamma < 0:
        raise InvalidParameter("gamma", "must be non-negative")
    if not np.isfinite(p.g0) or p.g0 < 0:
        raise InvalidParameter("g0", "must be non-negative")
    if not np.isfinite(p.n_bar_m) or p.n_bar_m < 0:
        raise InvalidParameter("n_bar_m", "must be non-negative")
    if not np.isfinite(p.delta_c):
        raise InvalidParameter("delta_c", "must be finite")


@dataclass(frozen=True)
class Pulse:
    """Piecewise-constant drive waveform on a uniform grid of control bins.

    ``omega[k]`` and ``phi[k]`` hold on ``[k*w, (k+1)*w)`` with bin width
    ``w = t_final / n_bins``. Amplitudes may go negative during descent (a
    sign flip is a pi phase shift, and clamping would kink the control
    space); phases are stored unwrapped.
    """

    t_final: float
    omega: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float).copy()
        ph = np.asarray(self.phi, dtype=float).copy()
        om.setflags(write=False)
        ph.setflags(write=False)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "phi", ph)

    @property
    def n_bins(self) -> int:
        return self.omega.shape[0]

    @property
    def bin_width(self) -> float:
        return self.t_final / self.n_bins

    @property
    def bin_edges(self) -> np.ndarray:
        """Left edges of the control bins."""
        return np.arange(self.n_bins) * self.bin_width

    def validate(self) -> None:
        if not np.isfinite(self.t_final) or self.t_final <= 0:
            raise InvalidParameter("t_final", "must be positive")
        if self.n_bins < 2:
            raise InvalidParameter("n_bins", "need at least 2 control bins")
        if self.phi.shape != self.omega.shape:
            raise InvalidParameter("phi", "amplitude/phase arrays differ in length")
        if not (np.all(np.isfinite(self.omega)) and np.all(np.isfinite(self.phi))):
            raise InvalidParameter("omega", "waveforms must be finite")

    def scaled(self, omega_factor: float = 1.0, phi_factor: float = 1.0) -> "Pulse":
        """Uniformly rescaled copy (used by the deviation studies)."""
        return Pulse(self.t_final, self.omega * omega_factor, self.phi * phi_factor)

    def to_dict(self) -> dict:
        return {
            "t_final": self.t_final,
            "omega": self.omega.tolist(),
            "phi": self.phi.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Pulse":
        return cls(float(d["t_final"]), np.array(d["omega"], dtype=float),
                   np.array(d["phi"], dtype=float))


@dataclass(frozen=True)
class MeanFieldState:
    """Classical displacement amplitudes of the cavity and mechanical modes."""

    alpha: complex = 0.0 + 0.0j
    beta: complex = 0.0 + 0.0j

    def validate(self) -> None:
        if not (np.isfinite(self.alpha) and np.isfinite(self.beta)):
            raise InvalidParameter("mean_field", "displacement amplitudes must be finite")


def thermal_initial_moments(p: SystemParams) -> np.ndarray:
    """Moment vector of the initial state: mechanics thermal at the bath
    occupation, cavity fluctuations in vacuum. Only ``<bdag b> = n_bar_m``
    is nonzero."""
    validate_params(p)
    x = np.zeros(10, dtype=complex)
    x[1] = p.n_bar_m
    return x


def conjugacy_residual(x: np.ndarray) -> float:
    """Worst absolute violation of the conjugate-pair and realness structure."""
    x = np.asarray(x, dtype=complex)
    res = 0.0
    for j, i in CONJUGATE_PAIRS:
        res = max(res, float(abs(x[j] - np.conj(x[i]))))
    res = max(res, abs(float(x[0].imag)), abs(float(x[1].imag)))
    return res


def validate_moments(x: np.ndarray, tol_scale: float = 1e-9) -> None:
    """Check the conjugacy structure and positivity of the occupations.

    Tolerance scales with the vector norm: tau = tol_scale * (1 + ||x||).
    """
    x = np.asarray(x, dtype=complex)
    if x.shape != (10,):
        raise InvalidParameter("moments", f"expected shape (10,), got {x.shape}")
    tau = tol_scale * (1.0 + float(np.linalg.norm(x)))
    if conjugacy_residual(x) > tau:
        raise InvalidParameter("moments", "conjugate-pair structure violated")
    if x[0].real < -tau or x[1].real < -tau:
        raise InvalidParameter("moments", "negative occupation")


def symplectic_eigenvalues(v: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a two-mode quadrature covariance matrix.

    Computed from the spectrum of i*Omega*V, whose eigenvalues come in
    +/- nu pairs; a physical state has both nu >= 1/2.
    """
    v = np.asarray(v, dtype=float)
    omega = np.zeros((4, 4))
    omega[0, 1] = omega[2, 3] = 1.0
    omega[1, 0] = omega[3, 2] = -1.0
    ev = np.linalg.eigvals(1j * omega @ v)
    # spectrum is (+nu1, -nu1, +nu2, -nu2); average the paired magnitudes
    nus = np.sort(np.abs(ev.real))
    return nus.reshape(2, 2).mean(axis=1)


def validate_covariance(v: np.ndarray, tol: float = 1e-9) -> None:
    """Check symmetry and physicality (both symplectic eigenvalues >= 1/2 - tol)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (4, 4):
        raise InvalidParameter("covariance", f"expected shape (4, 4), got {v.shape}")
    if not np.allclose(v, v.T, atol=1e-12 * (1.0 + np.abs(v).max())):
        raise InvalidParameter("covariance", "matrix not symmetric")
    nu = symplectic_eigenvalues(v)
    if np.min(nu) < 0.5 - tol:
        raise NonphysicalCovariance(
            f"symplectic eigenvalue {np.min(nu):.12g} below vacuum floor 1/2"
        )


def dumps_canonical(obj: dict) -> str:
    """Deterministic JSON encoding (sorted keys, full float round-trip)."""
    return json.dumps(obj, sort_keys=True, indent=2)
