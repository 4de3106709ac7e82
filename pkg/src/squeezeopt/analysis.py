"""Covariance assembly, rotating-quadrature variances, squeezing degree,
and Gaussian Wigner evaluation for the mechanical mode.

Quadratures are X = (o^dag + o)/sqrt(2), Y = i(o^dag - o)/sqrt(2) per mode,
ordered (Xa, Ya, Xb, Yb); with zero first moments the covariance is a
bilinear readout of the 10 second-order moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import (
    DomainError,
    NonphysicalCovariance,
    SingularCovariance,
    symplectic_eigenvalues,
    validate_moments,
)

PHYSICALITY_TOL = 1e-6


def covariance_from_moments(x: np.ndarray, check: bool = True) -> np.ndarray:
    """Build the 4x4 quadrature covariance from a moment vector.

    Raises :class:`NonphysicalCovariance` when a symplectic eigenvalue
    falls below 1/2 - 1e-6 (set ``check=False`` to skip, e.g. in plotting
    paths that tolerate marginal states).
    """
    x = np.asarray(x, dtype=complex)
    n_a = x[0].real
    n_b = x[1].real
    aa = x[7]
    bb = x[9]
    ab = x[8]
    abdag = x[3]
    v = np.empty((4, 4))
    v[0, 0] = 0.5 + n_a + aa.real
    v[1, 1] = 0.5 + n_a - aa.real
    v[0, 1] = v[1, 0] = aa.imag
    v[2, 2] = 0.5 + n_b + bb.real
    v[3, 3] = 0.5 + n_b - bb.real
    v[2, 3] = v[3, 2] = bb.imag
    v[0, 2] = v[2, 0] = ab.real + abdag.real
    v[0, 3] = v[3, 0] = ab.imag - abdag.imag
    v[1, 2] = v[2, 1] = ab.imag + abdag.imag
    v[1, 3] = v[3, 1] = abdag.real - ab.real
    if check:
        nu = symplectic_eigenvalues(v)
        if float(np.min(nu)) < 0.5 - PHYSICALITY_TOL:
            raise NonphysicalCovariance(
                f"symplectic eigenvalue {np.min(nu):.9g} below 1/2")
    return v


def moments_from_covariance(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`covariance_from_moments` (test and sampling helper)."""
    v = np.asarray(v, dtype=float)
    x = np.zeros(10, dtype=complex)
    x[0] = (v[0, 0] + v[1, 1] - 1.0) / 2.0
    x[1] = (v[2, 2] + v[3, 3] - 1.0) / 2.0
    x[7] = (v[0, 0] - v[1, 1]) / 2.0 + 1j * v[0, 1]
    x[9] = (v[2, 2] - v[3, 3]) / 2.0 + 1j * v[2, 3]
    x[8] = ((v[0, 2] - v[1, 3]) + 1j * (v[0, 3] + v[1, 2])) / 2.0
    x[3] = ((v[0, 2] + v[1, 3]) + 1j * (v[1, 2] - v[0, 3])) / 2.0
    x[4] = np.conj(x[7])
    x[6] = np.conj(x[9])
    x[2] = np.conj(x[3])
    x[5] = np.conj(x[8])
    return x


def quadrature_variance(v: np.ndarray, theta: float) -> float:
    """Variance of the rotated mechanical quadrature
    Xb cos(theta) + Yb sin(theta); squeezing means a value below 1/2."""
    c = math.cos(theta)
    s = math.sin(theta)
    return float(v[2, 2] * c * c + v[3, 3] * s * s
                 + 0.5 * (v[2, 3] + v[3, 2]) * math.sin(2.0 * theta))


def squeezing_degree(variance: float) -> float:
    """Squeezing in dB relative to the zero-point variance 1/2."""
    if variance <= 0.0:
        raise DomainError(f"variance must be positive, got {variance!r}")
    return -10.0 * math.log10(variance / 0.5)


def variance_from_degree(degree_db: float) -> float:
    """Inverse of :func:`squeezing_degree`; also the loss target for a
    requested squeezing in dB."""
    return 0.5 * 10.0 ** (-degree_db / 10.0)


def mechanism_variance(x: np.ndarray, theta: float) -> Tuple[float, bool]:
    """The rotated variance expressed directly in mechanical moments:

        1/2 + <bdag b> + Re<bdag bdag> cos(2 theta) - Im<bdag bdag> sin(2 theta)

    Returns (variance, squeezed) where ``squeezed`` flags the moment
    combination being negative. Identical (to rounding) with the
    covariance route; the sin term carries coefficient one, which is what
    expanding <X(theta)^2> yields.
    """
    x = np.asarray(x, dtype=complex)
    bdbd = x[6]
    combo = float(x[1].real + bdbd.real * math.cos(2.0 * theta)
                  - bdbd.imag * math.sin(2.0 * theta))
    return 0.5 + combo, combo < 0.0


def minimum_variance(x: np.ndarray) -> float:
    """Smallest rotated-quadrature variance over all angles:
    1/2 + <bdag b> - |<bb>| (eigenvalue of the mechanical block)."""
    x = np.asarray(x, dtype=complex)
    return float(0.5 + x[1].real - abs(x[9]))


def optimal_angle(x: np.ndarray) -> float:
    """Angle attaining :func:`minimum_variance`, in [0, pi)."""
    x = np.asarray(x, dtype=complex)
    bb = x[9]
    # variance(theta) = 1/2 + n + Re(bb) cos 2t + Im(bb) sin 2t
    th = 0.5 * (math.atan2(bb.imag, bb.real) + math.pi)
    return th % math.pi


@dataclass(frozen=True)
class SqueezingReport:
    """Snapshot of the mechanical squeezing figures at one instant."""

    theta: float
    variance: float
    degree_db: float
    mean_phonon: float
    moment_bb: complex

    @classmethod
    def from_moments(cls, x: np.ndarray, theta: float) -> "SqueezingReport":
        x = np.asarray(x, dtype=complex)
        var, _ = mechanism_variance(x, theta)
        return cls(theta=theta, variance=var, degree_db=squeezing_degree(var),
                   mean_phonon=float(x[1].real), moment_bb=complex(x[6]))


def squeezing_timeseries(grid: np.ndarray, moments: np.ndarray, theta: float):
    """Arrays (variance, degree_db, mean_phonon, bdag_bdag) along a
    moment trajectory; the CSV emitters consume these directly."""
    x1 = moments[:, 1].real
    bdbd = moments[:, 6]
    var = 0.5 + x1 + bdbd.real * math.cos(2 * theta) - bdbd.imag * math.sin(2 * theta)
    degree = -10.0 * np.log10(var / 0.5)
    return var, degree, x1, bdbd


@dataclass(frozen=True)
class WignerField:
    """Gaussian Wigner function of the mechanical mode on a cartesian grid."""

    grid_re: np.ndarray
    grid_im: np.ndarray
    values: np.ndarray

    def normalization(self) -> float:
        """Riemann-sum mass; close to one when the grid spans the state."""
        dr = self.grid_re[1] - self.grid_re[0]
        di = self.grid_im[1] - self.grid_im[0]
        return float(self.values.sum() * dr * di)


def wigner(v_mech: np.ndarray, n_points: int = 201,
           half_width: Optional[float] = None) -> WignerField:
    """Evaluate W(D) = exp(-D^T Vb^{-1} D / 2) / (2 pi sqrt(det Vb)) on a
    square grid.

    The exponent uses the inverse covariance; that (and only that) form
    integrates to one. The default grid spans five standard deviations of
    the wider quadrature per side.
    """
    vb = np.asarray(v_mech, dtype=float)
    if vb.shape != (4, 4) and vb.shape != (2, 2):
        raise DomainError("expected a 2x2 mechanical block or full 4x4 covariance")
    if vb.shape == (4, 4):
        vb = vb[2:, 2:]
    det = float(np.linalg.det(vb))
    if det <= 1e-14:
        raise SingularCovariance(f"det(Vb) = {det:.3g} too small")
    inv = np.linalg.inv(vb)
    if half_width is None:
        half_width = 5.0 * math.sqrt(max(vb[0, 0], vb[1, 1]))
    axis = np.linspace(-half_width, half_width, n_points)
    dr, di = np.meshgrid(axis, axis, indexing="ij")
    quad = inv[0, 0] * dr * dr + (inv[0, 1] + inv[1, 0]) * dr * di + inv[1, 1] * di * di
    values = np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))
    return WignerField(grid_re=axis.copy(), grid_im=axis.copy(), values=values)


def heisenberg_products(x: np.ndarray, n_angles: int = 64) -> np.ndarray:
    """Products Var(theta) * Var(theta + pi/2) on an angle grid; each must
    be >= 1/4 for a physical state."""
    validate_moments(np.asarray(x, dtype=complex), tol_scale=1e-6)
    v = covariance_from_moments(x, check=False)
    thetas = np.linspace(0.0, math.pi, n_angles, endpoint=False)
    out = np.empty(n_angles)
    for i, th in enumerate(thetas):
        out[i] = quadrature_variance(v, th) * quadrature_variance(v, th + math.pi / 2)
    return out
