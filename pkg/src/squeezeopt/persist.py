"""Run artifacts: delimited outputs, pulse files, result summaries, and
the per-run manifest.

Floats are printed with 17 significant digits so re-running a manifest
reproduces byte-identical payloads; every emitted file is recorded in the
manifest with its content hash, and the manifest itself is written
atomically at the end of the run.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import InvalidParameter, Pulse, SystemParams, dumps_canonical
from .optimizer import OptimizationResult, OptimizerConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT_FMT % float(x)


def write_csv(path: Path, header: Sequence[str], columns: Sequence[np.ndarray]) -> Path:
    """Write columns of numbers with a fixed, reproducible float format."""
    path = Path(path)
    lengths = {len(c) for c in columns}
    if len(lengths) != 1:
        raise InvalidParameter("columns", "CSV columns differ in length")
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return path


def read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        return {name: np.empty(0) for name in header}
    return {name: data[:, i] for i, name in enumerate(header)}


def save_pulse(path: Path, pulse: Pulse) -> Path:
    """Persist a pulse as t,omega,phi rows (times at bin left edges)."""
    return write_csv(path, ("t", "omega", "phi"),
                     (pulse.bin_edges, pulse.omega, pulse.phi))


def load_pulse(path: Path, t_final: Optional[float] = None,
               n_bins: Optional[int] = None) -> Pulse:
    """Load a pulse CSV; re-bin by nearest neighbor when a different grid is
    requested (with a warning, since that changes the waveform)."""
    cols = read_csv(Path(path))
    t = cols["t"]
    if t.shape[0] < 2:
        raise InvalidParameter("pulse", "pulse file needs at least two bins")
    width = t[1] - t[0]
    inferred_t_final = float(t[-1] + width)
    pulse = Pulse(inferred_t_final, cols["omega"], cols["phi"])
    if t_final is None and n_bins is None:
        return pulse
    t_final = t_final if t_final is not None else pulse.t_final
    n_bins = n_bins if n_bins is not None else pulse.n_bins
    if t_final == pulse.t_final and n_bins == pulse.n_bins:
        return pulse
    warnings.warn(
        f"re-binning pulse from (T={pulse.t_final}, bins={pulse.n_bins}) to "
        f"(T={t_final}, bins={n_bins}) by nearest neighbor", stacklevel=2)
    centers = (np.arange(n_bins) + 0.5) * (t_final / n_bins)
    idx = np.clip((centers / width).astype(int), 0, pulse.n_bins - 1)
    return Pulse(t_final, pulse.omega[idx], pulse.phi[idx])


def write_trajectory_csv(path: Path, grid: np.ndarray, alpha: np.ndarray,
                         beta: np.ndarray, moments: np.ndarray) -> Path:
    """Mean fields and all ten moments against time, real/imag split."""
    from .core import MOMENT_LABELS

    header = ["t", "re_alpha", "im_alpha", "re_beta", "im_beta"]
    cols = [grid, alpha.real, alpha.imag, beta.real, beta.imag]
    for i, label in enumerate(MOMENT_LABELS):
        header += [f"re_{label}", f"im_{label}"]
        cols += [moments[:, i].real, moments[:, i].imag]
    return write_csv(path, header, cols)


def write_squeezing_csv(path: Path, grid, variance, degree, phonons, bdbd) -> Path:
    return write_csv(path, ("t", "variance", "degree_db", "mean_phonon",
                            "re_bdag_bdag", "im_bdag_bdag"),
                     (grid, variance, degree, phonons, bdbd.real, bdbd.imag))


def write_loss_history_csv(path: Path, result: OptimizationResult) -> Path:
    n = result.loss_history.shape[0]
    degree = -10.0 * np.log10(result.loss_history / 0.5)
    return write_csv(path, ("iteration", "loss", "degree_db", "chi_omega", "chi_phi"),
                     (np.arange(n), result.loss_history, degree,
                      result.chi_omega_history, result.chi_phi_history))


def write_gradient_csv(path: Path, t: np.ndarray, d_omega: np.ndarray,
                       d_phi: np.ndarray) -> Path:
    return write_csv(path, ("bin_index", "t", "d_omega", "d_phi"),
                     (np.arange(t.shape[0]), t, d_omega, d_phi))


def write_wigner_csv(path: Path, field) -> Path:
    rr, ii = np.meshgrid(field.grid_re, field.grid_im, indexing="ij")
    return write_csv(path, ("d_re", "d_im", "w"),
                     (rr.ravel(), ii.ravel(), field.values.ravel()))


def write_result_json(path: Path, p: SystemParams, cfg: OptimizerConfig,
                      result: OptimizationResult, run_spec: dict) -> Path:
    payload = {
        "params": p.to_dict(),
        "config": cfg.to_dict(),
        "run": run_spec,
        "seed": result.seed,
        "grad_mode": result.gradient_mode,
        "status": result.status,
        "best_loss": result.best_loss,
        "best_db": result.best_degree_db,
        "best_iteration": result.best_iteration,
        "iterations": result.iterations,
        "wall_time": result.wall_time,
        "final_report": {
            "theta": result.final_report.theta,
            "variance": result.final_report.variance,
            "degree_db": result.final_report.degree_db,
            "mean_phonon": result.final_report.mean_phonon,
            "re_bdag_bdag": result.final_report.moment_bb.real,
            "im_bdag_bdag": result.final_report.moment_bb.imag,
        },
    }
    path = Path(path)
    path.write_text(dumps_canonical(payload) + "\n")
    return path


def sha256_of(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Inventory of one run: configuration snapshot, seed, timestamps, and
    every emitted file with its content hash."""

    config: dict
    seed: Optional[int]
    version: str
    started: float
    finished: Optional[float] = None
    files: Optional[list] = None

    def record(self, out_dir: Path, paths: Iterable[Path]) -> None:
        self.files = [
            {"path": str(Path(p).relative_to(out_dir)), "sha256": sha256_of(p)}
            for p in sorted(Path(p) for p in paths)
        ]

    def write(self, out_dir: Path) -> Path:
        """Atomic write (temp file + rename) of manifest.json."""
        self.finished = time.time()
        payload = {
            "config": self.config,
            "seed": self.seed,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "files": self.files or [],
        }
        target = Path(out_dir) / "manifest.json"
        tmp = target.with_suffix(".json.tmp")
        tmp.write_text(dumps_canonical(payload) + "\n")
        os.replace(tmp, target)
        return target


def load_config(path: Path) -> dict:
    """Read a flat TOML key-value configuration file."""
    with open(path, "rb") as fh:
        return tomllib.load(fh)


RUN_KEYS = ("t_final", "n_bins", "steps_per_bin", "grad_mode")


def split_config(raw: dict):
    """Split a flat config mapping into (SystemParams, OptimizerConfig,
    run-spec dict); unknown keys are rejected to keep runs auditable."""
    param_fields = set(SystemParams.__dataclass_fields__)
    cfg_fields = set(OptimizerConfig.__dataclass_fields__)
    params = {}
    cfg = {}
    run = {"t_final": 120.0, "n_bins": 2400, "steps_per_bin": 10,
           "grad_mode": "full-chain"}
    for key, value in raw.items():
        if key in param_fields:
            params[key] = float(value)
        elif key in cfg_fields:
            if key in ("max_iters", "seed", "init_harmonics"):
                cfg[key] = int(value)
            else:
                cfg[key] = float(value)
        elif key in RUN_KEYS:
            if key == "grad_mode":
                run[key] = str(value)
            elif key in ("n_bins", "steps_per_bin"):
                run[key] = int(value)
            else:
                run[key] = float(value)
        else:
            raise InvalidParameter(key, "unknown configuration key")
    return SystemParams(**params), OptimizerConfig(**cfg), run
