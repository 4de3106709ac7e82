"""Independent master-equation reference for the moment dynamics.

Integrates the full density operator of the driven two-mode system on a
truncated Fock space (dense matrices, fixed-step RK4) and reads the ten
second-order moments back out by trace. The bilinear-coupling fields
G(t) and Delta(t) are interpolated from a previously computed mean-field
trajectory, so this path shares no code with the moment-system integrator
beyond that input.

Only meant for desk-scale validation: an 8 x 10 truncation handles
sub-phonon coupling at sub-unity bath occupation in seconds. The optional
``include_nonlinear`` flag restores the number-times-position term that
the bilinear model drops, to quantify the linearization error.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import InvalidParameter, SystemParams, TruncationBreach, validate_params
from .dynamics import MeanFieldTrajectory, MomentTrajectory

TRUNCATION_POPULATION_LIMIT = 1e-3


@dataclass(frozen=True)
class FockConfig:
    """Truncation and stepping of the reference integrator."""

    dim_a: int = 8
    dim_b: int = 10
    include_nonlinear: bool = False
    dt: float = 0.005

    def validate(self) -> None:
        if self.dim_a < 2 or self.dim_b < 2:
            raise InvalidParameter("dim", "Fock truncations must be >= 2")
        if not self.dt > 0:
            raise InvalidParameter("dt", "step must be positive")


def _destroy(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def _thermal_density(dim: int, nbar: float) -> np.ndarray:
    if nbar <= 0:
        pops = np.zeros(dim)
        pops[0] = 1.0
    else:
        n = np.arange(dim)
        pops = nbar ** n / (nbar + 1.0) ** (n + 1)
        pops = pops / pops.sum()
    return np.diag(pops).astype(complex)


@dataclass(frozen=True)
class OracleDiagnostics:
    trace_drift: float
    hermiticity_drift: float
    top_population_a: float
    top_population_b: float


def fock_reference_moments(traj: MeanFieldTrajectory, p: SystemParams,
                           fc: FockConfig, n_thermal: float):
    """Reference moment trajectory from the truncated-space master equation.

    Returns ``(MomentTrajectory, OracleDiagnostics)`` sampled on the moment
    grid of ``traj``. Raises :class:`TruncationBreach` if the population of
    either top Fock level ever exceeds 1e-3.
    """
    validate_params(p)
    fc.validate()
    if n_thermal > fc.dim_b / 4:
        warnings.warn(
            f"thermal occupation {n_thermal} is large for dim_b={fc.dim_b}; "
            "expect truncation bias", stacklevel=2)

    da, db = fc.dim_a, fc.dim_b
    a = np.kron(_destroy(da), np.eye(db, dtype=complex))
    b = np.kron(np.eye(da, dtype=complex), _destroy(db))
    ad = a.conj().T
    bd = b.conj().T
    n_a = ad @ a
    n_b = bd @ b
    pos_b = b + bd
    coupling = ad @ pos_b          # multiplies G(t)
    coupling_dag = a @ pos_b       # multiplies conj(G(t))
    kerr = n_a @ pos_b             # optional -g0 term of the displaced frame

    gamma_up = p.gamma * p.n_bar_m
    gamma_down = p.gamma * (p.n_bar_m + 1.0)
    # anticommutator halves of all three dissipators, merged
    c_op = 0.5 * (p.kappa * n_a + gamma_down * n_b + gamma_up * (b @ bd))

    moment_ops = (ad @ a, bd @ b, ad @ b, a @ bd, ad @ ad, ad @ bd,
                  bd @ bd, a @ a, a @ b, b @ b)

    # oracle step: snap to an integer number of substeps per moment step
    t_out = traj.moment_grid
    dt_m = traj.dt
    sub = max(1, round(dt_m / fc.dt))
    dt = dt_m / sub
    n_steps = traj.n_steps * sub

    # drive fields at all oracle half-step times, interpolated once
    t_half = np.arange(2 * n_steps + 1) * (dt / 2.0)
    g_vals = p.g0 * (np.interp(t_half, traj.grid, traj.alpha.real)
                     + 1j * np.interp(t_half, traj.grid, traj.alpha.imag))
    delta_vals = p.delta_c + 2.0 * p.g0 * np.interp(t_half, traj.grid, traj.beta.real)

    def hamiltonian(idx: int) -> np.ndarray:
        g = g_vals[idx]
        h = delta_vals[idx] * n_a + p.omega_m * n_b \
            + g * coupling + np.conj(g) * coupling_dag
        if fc.include_nonlinear:
            h = h - p.g0 * kerr
        return h

    def rhs(rho: np.ndarray, h: np.ndarray) -> np.ndarray:
        out = -1j * (h @ rho - rho @ h)
        out += p.kappa * (a @ rho @ ad)
        out += gamma_down * (b @ rho @ bd)
        out += gamma_up * (bd @ rho @ b)
        out -= c_op @ rho + rho @ c_op
        return out

    rho = np.kron(np.diag([1.0] + [0.0] * (da - 1)).astype(complex),
                  _thermal_density(db, n_thermal))

    top_a_rows = np.arange((da - 1) * db, da * db)
    top_b_rows = np.arange(db - 1, da * db, db)

    moments = np.empty((traj.n_steps + 1, 10), dtype=complex)
    trace_drift = 0.0
    herm_drift = 0.0
    top_a = 0.0
    top_b = 0.0

    def record(out_idx: int):
        nonlocal trace_drift, herm_drift, top_a, top_b
        for j, op in enumerate(moment_ops):
            moments[out_idx, j] = np.einsum("ij,ji->", op, rho)
        trace_drift = max(trace_drift, abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag))
        herm_drift = max(herm_drift, float(np.abs(rho - rho.conj().T).max()))
        top_a = max(top_a, float(np.sum(np.diag(rho).real[top_a_rows])))
        top_b = max(top_b, float(np.sum(np.diag(rho).real[top_b_rows])))

    record(0)
    for step in range(n_steps):
        h0 = hamiltonian(2 * step)
        hm = hamiltonian(2 * step + 1)
        h1 = hamiltonian(2 * step + 2)
        k1 = rhs(rho, h0)
        k2 = rhs(rho + 0.5 * dt * k1, hm)
        k3 = rhs(rho + 0.5 * dt * k2, hm)
        k4 = rhs(rho + dt * k3, h1)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (step + 1) % sub == 0:
            record((step + 1) // sub)

    if top_a > TRUNCATION_POPULATION_LIMIT or top_b > TRUNCATION_POPULATION_LIMIT:
        raise TruncationBreach(
            f"top-level Fock populations reached ({top_a:.2e}, {top_b:.2e})")
    if moments[:, 0].real.max() > da / 4 or moments[:, 1].real.max() > db / 4:
        warnings.warn("occupations approached a quarter of the truncation",
                      stacklevel=2)

    diags = OracleDiagnostics(trace_drift=trace_drift, hermiticity_drift=herm_drift,
                              top_population_a=top_a, top_population_b=top_b)
    return MomentTrajectory(grid=t_out.copy(), moments=moments), diags
