"""Forward integration of the mean-field and second-moment systems, plus
the fundamental-solution propagators consumed by the gradient engine.

Everything here is a deterministic fixed-step RK4 pipeline:

1. ``integrate_meanfield`` solves the classical displacement equations

       d alpha/dt = -(i Delta(t) + kappa/2) alpha + i Omega e^{-i phi}
       d beta/dt  = -(i omega_m + gamma/2) beta - i g0 |alpha|^2

   with Delta(t) = delta_c + 2 g0 Re beta(t), on a grid of half the moment
   step so downstream integrators get exact stage-time samples.
2. ``integrate_moments`` propagates the 10 second-order moments through
   dX/dt = M(t) X + N(t) along those fields.
3. ``propagator_moments`` / ``propagator_meanfield`` build the
   fundamental matrices used by the functional gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as k
from .core import (
    IllConditioned,
    InvalidParameter,
    MeanFieldState,
    NumericalOverflow,
    Pulse,
    SystemParams,
    validate_params,
)

DEFAULT_STEPS_PER_BIN = 10


@dataclass(frozen=True)
class MeanFieldTrajectory:
    """Displacement amplitudes sampled on the half-step grid.

    ``grid`` has spacing dt/2 where dt is the moment-system step; the
    moment grid is ``grid[::2]``. ``steps_per_bin`` counts moment steps
    per control bin.
    """

    grid: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    pulse: Pulse
    steps_per_bin: int

    @property
    def n_steps(self) -> int:
        return (self.grid.shape[0] - 1) // 2

    @property
    def dt(self) -> float:
        return self.pulse.t_final / self.n_steps

    @property
    def moment_grid(self) -> np.ndarray:
        return self.grid[::2]

    @property
    def final_state(self) -> MeanFieldState:
        return MeanFieldState(complex(self.alpha[-1]), complex(self.beta[-1]))


@dataclass(frozen=True)
class MomentTrajectory:
    """Second-order moments on the moment grid (one row per grid point)."""

    grid: np.ndarray
    moments: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.moments[-1]


@dataclass(frozen=True)
class PropagatorGrid:
    """Fundamental-solution matrices on a (sub-sampled) moment grid.

    For ``dim == 10`` the entries are end-point propagators Phi(T, t_k) of
    the moment system (identity at the final grid point). For ``dim == 4``
    they are Lambda(t_k) of the mean-field variation system together with
    the independently integrated inverses.
    """

    dim: int
    grid: np.ndarray
    mats: np.ndarray
    inverses: Optional[np.ndarray] = None

    def validate(self, tol: float = 1e-8) -> None:
        eye = np.eye(self.dim)
        if self.dim == 10:
            drift = np.abs(self.mats[-1] - eye).max()
            if drift > tol:
                raise IllConditioned(f"Phi(T, T) deviates from identity by {drift:.3g}")
        if self.inverses is not None:
            worst = 0.0
            for m, mi in zip(self.mats, self.inverses):
                worst = max(worst, np.abs(m @ mi - eye).max())
            if worst > tol:
                raise IllConditioned(f"Lambda * Lambda^-1 deviates from identity by {worst:.3g}")


def effective_detuning(beta, p: SystemParams):
    """Drive detuning shifted by the static mechanical displacement."""
    return p.delta_c + 2.0 * p.g0 * np.real(beta)


def drift_matrix(mf: MeanFieldState, p: SystemParams) -> np.ndarray:
    """Coefficient matrix M of the moment system at one mean-field sample."""
    out = np.zeros((10, 10), dtype=complex)
    k.fill_drift(out, p.g0 * mf.alpha, effective_detuning(mf.beta, p),
                 p.omega_m, p.kappa, p.gamma)
    return out


def inhomogeneous_term(mf: MeanFieldState, p: SystemParams) -> np.ndarray:
    """Constant vector N of the moment system at one mean-field sample."""
    out = np.zeros(10, dtype=complex)
    k.fill_inhomogeneous(out, mf.alpha, p.g0, p.gamma, p.n_bar_m)
    return out


def meanfield_jacobian(mf: MeanFieldState, p: SystemParams) -> np.ndarray:
    """Drift W of the linearized displacement dynamics in the ordering
    (d alpha, d beta, d alpha*, d beta*)."""
    out = np.zeros((4, 4), dtype=complex)
    k.fill_meanfield_jacobian(out, p.g0 * mf.alpha, effective_detuning(mf.beta, p),
                              p.omega_m, p.kappa, p.gamma)
    return out


def integrate_meanfield(pulse: Pulse, p: SystemParams,
                        mf0: MeanFieldState = MeanFieldState(),
                        steps_per_bin: int = DEFAULT_STEPS_PER_BIN) -> MeanFieldTrajectory:
    """RK4 solution of the displacement equations under a piecewise-constant
    drive. Raises :class:`NumericalOverflow` if an amplitude passes 1e12."""
    validate_params(p)
    pulse.validate()
    mf0.validate()
    if steps_per_bin < 1:
        raise InvalidParameter("steps_per_bin", "must be >= 1")
    half_per_bin = 2 * steps_per_bin
    dt_half = pulse.bin_width / half_per_bin
    alpha, beta, status = k.mean_field_rk4(
        pulse.omega, pulse.phi, half_per_bin, dt_half,
        p.kappa, p.gamma, p.delta_c, p.g0, p.omega_m,
        complex(mf0.alpha), complex(mf0.beta))
    if status == k.STATUS_OVERFLOW:
        raise NumericalOverflow("mean-field amplitude exceeded 1e12")
    grid = np.arange(alpha.shape[0]) * dt_half
    return MeanFieldTrajectory(grid=grid, alpha=alpha, beta=beta,
                               pulse=pulse, steps_per_bin=steps_per_bin)


def integrate_moments(traj: MeanFieldTrajectory, p: SystemParams,
                      x0: np.ndarray) -> MomentTrajectory:
    """RK4 solution of dX/dt = M(t) X + N(t) along stored mean fields."""
    validate_params(p)
    x0 = np.asarray(x0, dtype=complex)
    steps = traj.n_steps
    X, status = k.moment_rk4(traj.alpha, traj.beta, steps, traj.dt,
                             p.kappa, p.gamma, p.delta_c, p.g0, p.omega_m,
                             p.n_bar_m, x0)
    if status == k.STATUS_OVERFLOW:
        raise NumericalOverflow("moment magnitude exceeded 1e12")
    return MomentTrajectory(grid=traj.moment_grid.copy(), moments=X)


def propagator_moments(traj: MeanFieldTrajectory, p: SystemParams,
                       stride: int = 1) -> PropagatorGrid:
    """End-point propagators Phi(T, t_k) of the moment system.

    Accumulated backward from the identity (the inverse fundamental matrix
    is never formed). ``stride`` sub-samples the storage grid and must
    divide the step count.
    """
    validate_params(p)
    steps = traj.n_steps
    if stride < 1 or steps % stride != 0:
        raise InvalidParameter("stride", "must divide the number of steps")
    mats, status = k.propagator10_rk4(traj.alpha, traj.beta, steps, traj.dt,
                                      p.kappa, p.gamma, p.delta_c, p.g0,
                                      p.omega_m, stride)
    if status == k.STATUS_ILL_CONDITIONED:
        raise IllConditioned("moment propagator norm exceeded 1e14")
    return PropagatorGrid(dim=10, grid=traj.moment_grid[::stride].copy(), mats=mats)


def propagator_meanfield(traj: MeanFieldTrajectory, p: SystemParams) -> PropagatorGrid:
    """Fundamental matrix Lambda(t_k) of the mean-field variation system,
    with inverses from the companion equation d(L^-1)/dt = -L^-1 W."""
    validate_params(p)
    steps = traj.n_steps
    lam, lam_inv, status = k.meanfield_propagator_rk4(
        traj.alpha, traj.beta, steps, traj.dt,
        p.kappa, p.gamma, p.delta_c, p.g0, p.omega_m)
    if status == k.STATUS_ILL_CONDITIONED:
        raise IllConditioned("mean-field propagator norm exceeded 1e14")
    return PropagatorGrid(dim=4, grid=traj.moment_grid.copy(), mats=lam,
                          inverses=lam_inv)


def adjoint_rows(traj: MeanFieldTrajectory, p: SystemParams,
                 seed: np.ndarray) -> np.ndarray:
    """Rows v(t_k) = seed . Phi(T, t_k) of the moment propagator, computed
    by backward integration of the single row instead of the full matrix."""
    validate_params(p)
    seed = np.asarray(seed, dtype=complex)
    return k.adjoint_rk4(traj.alpha, traj.beta, traj.n_steps, traj.dt,
                         p.kappa, p.gamma, p.delta_c, p.g0, p.omega_m, seed)


def simulate(pulse: Pulse, p: SystemParams, x0: Optional[np.ndarray] = None,
             mf0: MeanFieldState = MeanFieldState(),
             steps_per_bin: int = DEFAULT_STEPS_PER_BIN):
    """Convenience wrapper: mean fields plus moments in one call."""
    from .core import thermal_initial_moments

    if x0 is None:
        x0 = thermal_initial_moments(p)
    traj = integrate_meanfield(pulse, p, mf0=mf0, steps_per_bin=steps_per_bin)
    return traj, integrate_moments(traj, p, x0)
