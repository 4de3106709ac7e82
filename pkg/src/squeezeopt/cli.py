"""Command-line entry point.

Subcommands cover the full workflow: ``optimize`` learns a pulse,
``simulate`` re-runs a stored one, ``grad-check`` validates the analytic
gradients against finite differences, ``sweep``/``decay``/``noise``/
``wigner``/``oracle-check`` drive the parameter studies. Every run writes
its delimited outputs plus rendered figures into a run directory, listed
in manifest.json with content hashes.

Exit codes: 0 success, 2 configuration problems, 3 numerical failures,
4 failed verification gates.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    covariance_from_moments,
    minimum_variance,
    squeezing_timeseries,
    wigner,
)
from .core import InvalidParameter, Pulse, SqueezeOptError, SystemParams, thermal_initial_moments
from .dynamics import integrate_meanfield, integrate_moments
from .experiments import angle_sweep, deviation_sweep, free_decay, noise_trials, sideband_sweep
from .gradient import (
    cosine_similarity,
    finite_difference_gradient,
    loss_gradient,
    relative_gradient_error,
)
from .optimizer import OptimizerConfig, optimize, random_smooth_pulse
from .oracle import FockConfig, fock_reference_moments
from . import persist, plots

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_GATE = 4

GRAD_MODE_FLAGS = {"paper": "paper-pointwise", "full": "full-chain",
                   "fd": "finite-difference"}


def _load(args) -> tuple[SystemParams, OptimizerConfig, dict]:
    raw = persist.load_config(Path(args.config)) if args.config else {}
    p, cfg, run = persist.split_config(raw)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "target_db", None) is not None:
        cfg = replace(cfg, target_db=args.target_db, epsilon=None)
    if getattr(args, "grad_mode", None) is not None:
        run["grad_mode"] = GRAD_MODE_FLAGS[args.grad_mode]
    if getattr(args, "bins", None) is not None:
        run["n_bins"] = args.bins
    if getattr(args, "t_final", None) is not None:
        run["t_final"] = args.t_final
    return p, cfg, run


def _run_dir(args, default: str) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path("runs") / default
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out_dir: Path, p, cfg, run, seed, files) -> None:
    man = persist.RunManifest(
        config={"params": p.to_dict(), "optimizer": cfg.to_dict(), "run": run},
        seed=seed, version=__version__, started=time.time())
    man.record(out_dir, files)
    man.write(out_dir)


def cmd_optimize(args) -> int:
    p, cfg, run = _load(args)
    out = _run_dir(args, "optimize")
    result = optimize(p, cfg, run["t_final"], run["n_bins"],
                      steps_per_bin=run["steps_per_bin"],
                      gradient_mode=run["grad_mode"])
    traj = integrate_meanfield(result.pulse, p, steps_per_bin=run["steps_per_bin"])
    mtraj = integrate_moments(traj, p, thermal_initial_moments(p))
    var, deg, phon, bdbd = squeezing_timeseries(mtraj.grid, mtraj.moments, cfg.theta)

    files = [
        persist.save_pulse(out / "pulse.csv", result.pulse),
        persist.write_loss_history_csv(out / "loss_history.csv", result),
        persist.write_squeezing_csv(out / "squeezing.csv", mtraj.grid, var, deg, phon, bdbd),
        persist.write_result_json(out / "result.json", p, cfg, result, run),
    ]
    if args.plot:
        files.append(plots.render_pulse(out / "pulse.png", result.pulse.bin_edges,
                                        result.pulse.omega, result.pulse.phi))
        files.append(plots.render_loss_history(out / "loss_history.png",
                                               result.loss_history))
        files.append(plots.render_squeezing(out / "squeezing.png", mtraj.grid, deg, phon))
    _manifest(out, p, cfg, run, cfg.seed, files)
    print(f"{result.status}: best loss {result.best_loss:.6g} "
          f"({result.best_degree_db:.3f} dB) after {result.iterations} iterations "
          f"-> {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    p, cfg, run = _load(args)
    pulse = persist.load_pulse(Path(args.pulse))
    out = _run_dir(args, "simulate")
    traj = integrate_meanfield(pulse, p, steps_per_bin=run["steps_per_bin"])
    mtraj = integrate_moments(traj, p, thermal_initial_moments(p))
    var, deg, phon, bdbd = squeezing_timeseries(mtraj.grid, mtraj.moments, cfg.theta)
    files = [
        persist.write_trajectory_csv(out / "trajectory.csv", mtraj.grid,
                                     traj.alpha[::2], traj.beta[::2], mtraj.moments),
        persist.write_squeezing_csv(out / "squeezing.csv", mtraj.grid, var, deg,
                                    phon, bdbd),
    ]
    if args.plot:
        files.append(plots.render_squeezing(out / "squeezing.png", mtraj.grid, deg, phon))
    _manifest(out, p, cfg, run, None, files)
    print(f"simulated {pulse.n_bins} bins over T={pulse.t_final}; "
          f"final degree {deg[-1]:.3f} dB -> {out}")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    p, cfg, run = _load(args)
    t_final = args.t_final if args.t_final is not None else 1.0
    n_bins = args.bins if args.bins is not None else 20
    out = _run_dir(args, "grad_check")
    pulse = random_smooth_pulse(cfg, t_final, n_bins)
    spb = run["steps_per_bin"]
    full = loss_gradient(pulse, p, cfg.theta, mode="full-chain", steps_per_bin=spb)
    point = loss_gradient(pulse, p, cfg.theta, mode="paper-pointwise", steps_per_bin=spb)
    fd = finite_difference_gradient(pulse, p, cfg.theta, steps_per_bin=spb)
    err_full = relative_gradient_error(full, fd)
    cos_point = cosine_similarity(point, fd)
    files = [
        persist.write_gradient_csv(out / "gradient_full.csv", pulse.bin_edges,
                                   full.d_omega, full.d_phi),
        persist.write_gradient_csv(out / "gradient_pointwise.csv", pulse.bin_edges,
                                   point.d_omega, point.d_phi),
        persist.write_gradient_csv(out / "gradient_fd.csv", pulse.bin_edges,
                                   fd.d_omega, fd.d_phi),
    ]
    _manifest(out, p, cfg, run, cfg.seed, files)
    print(f"full-chain vs finite differences: max relative error {err_full:.3e}")
    print(f"pointwise vs finite differences: cosine similarity {cos_point:.4f}")
    if err_full > 1e-4:
        print("FAIL: full-chain gradient outside 1e-4", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def cmd_sweep(args) -> int:
    p, cfg, run = _load(args)
    out = _run_dir(args, f"sweep_{args.kind}")
    files = []
    if args.kind == "angle":
        thetas = np.deg2rad([0.0, 45.0, 90.0, 135.0])
        points = angle_sweep(p, cfg, thetas, run["t_final"], run["n_bins"],
                             steps_per_bin=run["steps_per_bin"],
                             gradient_mode=run["grad_mode"])
        deg = np.rad2deg([pt.theta for pt in points])
        max_om = np.array([pt.max_abs_omega for pt in points])
        max_ph = np.array([pt.max_abs_phi for pt in points])
        files.append(persist.write_csv(out / "angle_sweep.csv",
                                       ("theta_deg", "max_abs_omega", "max_abs_phi"),
                                       (deg, max_om, max_ph)))
        for pt in points:
            if pt.record.result is not None:
                label = f"pulse_theta{pt.theta:.4f}.csv"
                files.append(persist.save_pulse(out / label, pt.record.result.pulse))
        if args.plot:
            files.append(plots.render_sweep(out / "angle_sweep.png", deg, max_om,
                                            "theta (deg)", "max |Omega|"))
    elif args.kind == "kappa":
        kappas = [0.5, 1.0, 1.5]
        points = sideband_sweep(p, cfg, kappas, run["t_final"], run["n_bins"],
                                steps_per_bin=run["steps_per_bin"],
                                gradient_mode=run["grad_mode"])
        ks = np.array([pt.kappa for pt in points])
        max_om = np.array([pt.max_abs_omega for pt in points])
        files.append(persist.write_csv(out / "kappa_sweep.csv",
                                       ("kappa", "max_abs_omega"), (ks, max_om)))
        for pt in points:
            if pt.record.result is not None and pt.grid is not None:
                stem = f"kappa{pt.kappa:g}"
                files.append(persist.save_pulse(out / f"pulse_{stem}.csv",
                                                pt.record.result.pulse))
                files.append(persist.write_csv(
                    out / f"squeezing_{stem}.csv",
                    ("t", "degree_db", "mean_phonon"),
                    (pt.grid, pt.degree_curve, pt.phonon_curve)))
        if args.plot:
            files.append(plots.render_sweep(out / "kappa_sweep.png", ks, max_om,
                                            "kappa / omega_m", "max |Omega|"))
    elif args.kind == "eta":
        if not args.pulse:
            print("eta sweep needs --pulse", file=sys.stderr)
            return EXIT_CONFIG
        pulse = persist.load_pulse(Path(args.pulse))
        etas = np.linspace(-0.1, 0.1, 21)
        dev = deviation_sweep(pulse, p, cfg.theta, etas,
                              steps_per_bin=run["steps_per_bin"])
        files.append(persist.write_csv(out / "eta_sweep.csv",
                                       ("eta", "degree_amplitude_db", "degree_phase_db"),
                                       (dev.etas, dev.degree_amplitude, dev.degree_phase)))
        if args.plot:
            fig_path = out / "eta_sweep.png"
            files.append(plots.render_sweep(fig_path, dev.etas, dev.degree_amplitude,
                                            "eta", "degree (dB), amplitude-perturbed"))
    else:  # pragma: no cover - argparse restricts choices
        return EXIT_CONFIG
    _manifest(out, p, cfg, run, cfg.seed, files)
    print(f"sweep '{args.kind}' -> {out}")
    return EXIT_OK


def cmd_decay(args) -> int:
    p, cfg, run = _load(args)
    pulse = persist.load_pulse(Path(args.pulse))
    out = _run_dir(args, "decay")
    dec = free_decay(pulse, p, cfg.theta, args.t_end,
                     steps_per_bin=run["steps_per_bin"])
    files = [persist.write_csv(out / "decay.csv",
                               ("t", "degree_at_theta_db", "degree_optimal_db",
                                "mean_phonon"),
                               (dec.grid, dec.degree_at_theta, dec.degree_optimal,
                                dec.mean_phonon))]
    if args.plot:
        files.append(plots.render_squeezing(out / "decay.png", dec.grid,
                                            dec.degree_optimal, dec.mean_phonon))
    _manifest(out, p, cfg, run, None, files)
    print(f"decay to t={args.t_end}: optimal-angle degree "
          f"{dec.degree_optimal[-1]:.3f} dB -> {out}")
    return EXIT_OK


def cmd_noise(args) -> int:
    p, cfg, run = _load(args)
    pulse = persist.load_pulse(Path(args.pulse))
    out = _run_dir(args, "noise")
    res = noise_trials(pulse, p, cfg.theta, args.sigma_omega, args.sigma_phi,
                       args.trials, cfg.seed, steps_per_bin=run["steps_per_bin"])
    header = ["t", "baseline_db", "mean_db"] + [f"trial{i}_db" for i in range(args.trials)]
    cols = [res.grid, res.baseline_degree, res.mean_degree] + list(res.trial_degrees)
    files = [persist.write_csv(out / "noise_trials.csv", header, cols)]
    if args.plot:
        files.append(plots.render_noise_trials(out / "noise_trials.png", res.grid,
                                               res.baseline_degree, res.trial_degrees,
                                               res.mean_degree))
    _manifest(out, p, cfg, run, cfg.seed, files)
    print(f"noise trials: mean final deviation "
          f"{res.final_deviations.mean():.4f} dB -> {out}")
    return EXIT_OK


def cmd_wigner(args) -> int:
    p, cfg, run = _load(args)
    pulse = persist.load_pulse(Path(args.pulse))
    out = _run_dir(args, "wigner")
    at_time = args.at_time if args.at_time is not None else pulse.t_final
    if at_time > pulse.t_final:
        print("--at-time beyond the pulse; use decay for free evolution",
              file=sys.stderr)
        return EXIT_CONFIG
    traj = integrate_meanfield(pulse, p, steps_per_bin=run["steps_per_bin"])
    mtraj = integrate_moments(traj, p, thermal_initial_moments(p))
    idx = int(round(at_time / mtraj.grid[-1] * (mtraj.grid.shape[0] - 1)))
    v = covariance_from_moments(mtraj.moments[idx])
    field = wigner(v)
    files = [persist.write_wigner_csv(out / "wigner.csv", field)]
    if args.plot:
        files.append(plots.render_wigner(out / "wigner.png", field.grid_re,
                                         field.grid_im, field.values))
    _manifest(out, p, cfg, run, None, files)
    print(f"wigner at t={mtraj.grid[idx]:.4f}: peak {field.values.max():.4f}, "
          f"min variance {minimum_variance(mtraj.moments[idx]):.4f} -> {out}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    p, cfg, run = _load(args)
    out = _run_dir(args, "oracle_check")
    # desk-scale scenario: weak coupling, sub-unity bath occupation
    check_p = replace(p, g0=0.02, n_bar_m=0.2)
    t_final = min(run["t_final"], 10.0)
    n_bins = 100
    rng = np.random.default_rng(cfg.seed)
    omega = 8.0 + 2.0 * rng.standard_normal(n_bins)
    phi = 0.3 * rng.standard_normal(n_bins)
    pulse = Pulse(t_final, omega, phi)
    traj = integrate_meanfield(pulse, check_p, steps_per_bin=run["steps_per_bin"])
    mtraj = integrate_moments(traj, check_p, thermal_initial_moments(check_p))
    ref, diags = fock_reference_moments(traj, check_p, FockConfig(),
                                        n_thermal=check_p.n_bar_m)
    scale = np.abs(ref.moments).max(axis=0)
    rel = np.abs(mtraj.moments - ref.moments) / np.maximum(np.abs(ref.moments),
                                                           0.02 * scale)
    worst = float(rel.max())
    files = [persist.write_trajectory_csv(out / "oracle_moments.csv", ref.grid,
                                          traj.alpha[::2], traj.beta[::2],
                                          ref.moments)]
    _manifest(out, check_p, cfg, run, cfg.seed, files)
    print(f"max coupling |G| = {np.abs(check_p.g0 * traj.alpha).max():.3f}")
    print(f"oracle trace drift {diags.trace_drift:.2e}, "
          f"hermiticity drift {diags.hermiticity_drift:.2e}")
    print(f"worst relative moment deviation: {worst:.4f}")
    if worst > 0.02:
        print("FAIL: moment dynamics deviates from the reference beyond 2%",
              file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squeezeopt",
        description="Pulse optimization for transient mechanical squeezing")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, pulse=False):
        sp.add_argument("--config", type=str, default=None,
                        help="flat TOML config file")
        sp.add_argument("--out", type=str, default=None, help="run directory")
        sp.add_argument("--seed", type=int, default=None)
        plot = sp.add_mutually_exclusive_group()
        plot.add_argument("--plot", dest="plot", action="store_true", default=True,
                          help="render figures next to the CSVs (default)")
        plot.add_argument("--no-plot", dest="plot", action="store_false")
        if pulse:
            sp.add_argument("--pulse", type=str, required=True,
                            help="pulse CSV (t,omega,phi)")

    sp = sub.add_parser("optimize", help="learn a squeezing pulse")
    common(sp)
    sp.add_argument("--grad-mode", choices=sorted(GRAD_MODE_FLAGS), default=None)
    sp.add_argument("--target-db", type=float, default=None)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("simulate", help="forward-run a stored pulse")
    common(sp, pulse=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("grad-check", help="verify gradients against finite differences")
    common(sp)
    sp.add_argument("--bins", type=int, default=None)
    sp.add_argument("--t-final", type=float, default=None)
    sp.set_defaults(func=cmd_grad_check)

    sp = sub.add_parser("sweep", help="angle / kappa / eta parameter studies")
    sp.add_argument("kind", choices=("angle", "kappa", "eta"))
    common(sp)
    sp.add_argument("--pulse", type=str, default=None,
                    help="stored pulse (eta sweep only)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("decay", help="free evolution after the drive stops")
    common(sp, pulse=True)
    sp.add_argument("--t-end", type=float, required=True)
    sp.set_defaults(func=cmd_decay)

    sp = sub.add_parser("noise", help="per-bin Gaussian drive-noise trials")
    common(sp, pulse=True)
    sp.add_argument("--sigma-omega", type=float, default=0.0)
    sp.add_argument("--sigma-phi", type=float, default=0.0)
    sp.add_argument("--trials", type=int, default=10)
    sp.set_defaults(func=cmd_noise)

    sp = sub.add_parser("wigner", help="phase-space snapshot of the mechanics")
    common(sp, pulse=True)
    sp.add_argument("--at-time", type=float, default=None)
    sp.set_defaults(func=cmd_wigner)

    sp = sub.add_parser("oracle-check", help="moment dynamics vs the Fock-space reference")
    common(sp)
    sp.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidParameter as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SqueezeOptError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
