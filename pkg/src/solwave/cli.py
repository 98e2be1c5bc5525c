"""Command-line interface.

Subcommands: check-rho, soliton, spectrum, simulate, linearize, analyze,
run-preset.  Numeric CSV output is full double precision; summaries are
JSON.  Runs are deterministic for a fixed --seed.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .charge import check_moments, check_wiener, make_admissible_density
from .diagnostics import extract_modulation, fit_decay, scattering_state, weighted_norm
from .dynamics import SimConfig, run_linearized, run_nonlinear
from .grid import Grid3
from .presets import (
    ExperimentPreset,
    analyze_trajectory,
    build_initial,
    builtin_preset,
    dump_trajectory,
    load_config,
    run_preset,
    write_csv,
    write_json,
    write_meta,
)
from .soliton import (
    FieldPair,
    LinState,
    PhaseState,
    SolitonParams,
    soliton_state,
    tangent_frame,
)
from .spectral import inverse_blocks, on_axis
from .dynamics import Trajectory


def _vec(text):
    parts = [float(x) for x in text.replace(",", " ").split()]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"need 3 components, got {text!r}")
    return np.array(parts)


def _add_grid_args(p):
    p.add_argument("--n", type=int, default=64, help="grid points per axis")
    p.add_argument("--box", type=float, default=16.0, help="box side length")
    p.add_argument("--base-width", type=float, default=1.0)
    p.add_argument("--amplitude", type=float, default=0.25)


def cmd_check_rho(args):
    grid = Grid3(args.n, args.box)
    rho = make_admissible_density(args.base_width, args.amplitude, grid)
    wiener = rho.wiener or check_wiener(rho)
    moments = rho.moments or check_moments(rho, 4)
    payload = {
        "wiener": {
            "min_abs": wiener.min_abs,
            "worst_k": wiener.worst_k.tolist(),
            "floor": wiener.floor,
            "min_abs_grid": wiener.min_abs_grid,
            "passed": wiener.passed,
        },
        "moments": {
            "worst_rel": moments.worst_rel,
            "worst_order": list(moments.worst_order),
            "tol": moments.tol,
            "l1_norm": moments.l1_norm,
            "passed": moments.passed,
        },
        "effective_radius": rho.effective_radius,
        "pass": wiener.passed and moments.passed,
    }
    _emit_json(payload, args.out, "check_rho.json")
    return 0 if payload["pass"] else 1


def cmd_soliton(args):
    grid = Grid3(args.n, args.box)
    rho = make_admissible_density(args.base_width, args.amplitude, grid)
    sigma = SolitonParams(args.b, args.v)
    state = soliton_state(rho, sigma, grid)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    mid = grid.n // 2
    rows = np.column_stack(
        [
            grid.x1,
            state.fields.psi[:, mid, mid],
            state.fields.pi[:, mid, mid],
            state.fields.psi[mid, :, mid],
            state.fields.pi[mid, :, mid],
        ]
    )
    write_csv(
        out / "soliton_slices.csv",
        ["x", "psi_axis1", "pi_axis1", "psi_axis2", "pi_axis2"],
        rows,
    )
    norms = {
        "f_norm": state.fields.f_norm(),
        "e_norm": state.e_norm(),
        "weighted": {
            str(a): weighted_norm(state.fields, a) for a in (0.0, 1.0, 2.0, 4.25)
        },
        "p_v": sigma.p_v.tolist(),
        "gamma": sigma.gamma,
    }
    write_json(out / "soliton_norms.json", norms)
    print(json.dumps(norms, indent=2))
    return 0


def spectrum_rows(rho, v, omegas):
    rows = []
    for om in omegas:
        se = on_axis(rho, v, float(om))
        se = inverse_blocks(se)
        f1, f = se.F[0, 0], se.F[1, 1]
        sign_ok = (np.sign(om) * f1.imag < 0) and (np.sign(om) * f.imag < 0)
        rows.append(
            [
                om,
                f1.real,
                f1.imag,
                f.real,
                f.imag,
                se.detM.real,
                se.detM.imag,
                1.0 if sign_ok else 0.0,
            ]
        )
    return rows


def cmd_spectrum(args):
    grid = Grid3(args.n, args.box)
    rho = make_admissible_density(args.base_width, args.amplitude, grid)
    if args.omega_grid:
        omegas = [float(x) for x in args.omega_grid.replace(",", " ").split()]
    else:
        omegas = np.linspace(0.25, 4.0, 16).tolist()
    rows = spectrum_rows(rho, args.v, omegas)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "spectrum.csv",
        ["omega", "f1_re", "f1_im", "f_re", "f_im", "detM_re", "detM_im", "imF_sign_ok"],
        rows,
    )
    if args.lam is not None:
        from .spectral import kh_matrices

        se = kh_matrices(rho, args.v, complex(args.lam))
        write_json(
            out / "kh.json",
            {
                "lambda": {"re": complex(args.lam).real, "im": complex(args.lam).imag},
                "K": se.K,
                "H_re": se.H.real,
                "H_im": se.H.imag,
                "detM": se.detM,
            },
        )
    print(f"wrote {out / 'spectrum.csv'}")
    return 0


def _config_preset(args, default_kind):
    if args.config:
        preset = load_config(args.config)
    else:
        preset = ExperimentPreset(name=default_kind, kind=default_kind)
    if args.seed is not None:
        preset.seed = args.seed
    return preset


def cmd_simulate(args):
    preset = _config_preset(args, "soliton")
    out = Path(args.out or f"run-{preset.name}")
    grid = Grid3(preset.n, preset.box)
    rho = make_admissible_density(preset.base_width, preset.amplitude, grid)
    initial = build_initial(preset, rho, grid)
    cfg = SimConfig(
        grid=grid,
        rho=rho,
        initial=initial,
        t_end=preset.t_end,
        dt=preset.dt_factor * grid.h,
        record_every=preset.record_every,
        snapshot_dtype=preset.snapshot_dtype,
    )
    traj = run_nonlinear(cfg)
    dump_trajectory(traj, out)
    write_meta(out, preset, {"wrap_margin": traj.meta.get("wrap_margin")})
    print(f"wrote {out}")
    return 0


def cmd_linearize(args):
    preset = _config_preset(args, "soliton")
    out = Path(args.out or f"lin-{preset.name}")
    grid = Grid3(preset.n, preset.box)
    rho = make_admissible_density(preset.base_width, preset.amplitude, grid)
    v1 = np.asarray(preset.v, dtype=float)
    frame = tangent_frame(rho, v1, grid)
    x0 = frame[3]  # a secular seed by default: tau_4
    sigma = SolitonParams(np.zeros(3), v1)
    cfg = SimConfig(
        grid=grid,
        rho=rho,
        initial=soliton_state(rho, sigma, grid),
        t_end=preset.t_end,
        dt=preset.dt_factor * grid.h,
        record_every=preset.record_every,
    )
    traj = run_linearized(x0, v1, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "linearized_particle.csv",
        ["t", "Qx", "Qy", "Qz", "Px", "Py", "Pz"],
        np.column_stack([traj.particle_times, traj.particle_q, traj.particle_p]),
    )
    write_csv(
        out / "frozen_energy.csv",
        ["t", "H_vv"],
        np.column_stack([traj.times, traj.energies]),
    )
    write_meta(out, preset)
    print(f"wrote {out}")
    return 0


def cmd_analyze(args):
    run_dir = Path(args.run_dir)
    data = np.load(run_dir / "fields.npz")
    meta = json.loads((run_dir / "meta.json").read_text())
    pconf = meta["preset"]
    grid = Grid3(pconf["n"], pconf["box"])
    rho = make_admissible_density(pconf["base_width"], pconf["amplitude"], grid)
    particle = np.loadtxt(run_dir / "particle.csv", delimiter=",", skiprows=1)
    energies = np.loadtxt(run_dir / "energy.csv", delimiter=",", skiprows=1)
    states = [
        PhaseState(
            FieldPair(grid, data["psi"][i].astype(float), data["pi"][i].astype(float)),
            data["q"][i],
            data["p"][i],
        )
        for i in range(len(data["times"]))
    ]
    traj = Trajectory(
        times=data["times"],
        states=states,
        energies=energies[:, 1] if energies.ndim > 1 else np.atleast_1d(energies[1]),
        particle_times=particle[:, 0],
        particle_q=particle[:, 1:4],
        particle_p=particle[:, 4:7],
        particle_qdot=particle[:, 7:10],
    )
    delta = args.delta if args.delta is not None else pconf.get("delta", 0.25)
    out = Path(args.out or run_dir)
    analyze_trajectory(traj, rho, delta, out)
    print(f"wrote analysis to {out}")
    return 0


def cmd_run_preset(args):
    if args.config:
        preset = load_config(args.config)
    else:
        preset = builtin_preset(args.preset)
    if args.seed is not None:
        preset.seed = args.seed
    out = args.out or f"run-{preset.name}"
    report = run_preset(preset, out)
    print(json.dumps(report, indent=2, default=str))
    return 0 if report["status"] == "ok" else 1


def _emit_json(payload, out, default_name):
    text = json.dumps(payload, indent=2)
    print(text)
    if out:
        outp = Path(out)
        outp.mkdir(parents=True, exist_ok=True)
        (outp / default_name).write_text(text + "\n")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="solwave",
        description="wave-particle soliton scattering laboratory",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-rho", help="admissibility report for the coupling density")
    _add_grid_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check_rho)

    p = sub.add_parser("soliton", help="emit soliton field slices and norms")
    _add_grid_args(p)
    p.add_argument("--v", type=_vec, default=np.array([0.3, 0.0, 0.0]))
    p.add_argument("--b", type=_vec, default=np.zeros(3))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_soliton)

    p = sub.add_parser("spectrum", help="on-axis resolvent scan")
    _add_grid_args(p)
    p.add_argument("--v", type=_vec, default=np.array([0.3, 0.0, 0.0]))
    p.add_argument("--omega-grid", default="", help="space-separated omegas")
    p.add_argument("--lam", default=None, help="optional single complex lambda")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)

    for name, fn in (("simulate", cmd_simulate), ("linearize", cmd_linearize)):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(func=fn)

    p = sub.add_parser("analyze", help="post-process a simulate run directory")
    p.add_argument("--in", dest="run_dir", required=True)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run-preset", help="execute a named experiment pipeline")
    p.add_argument("preset", nargs="?", default="soliton-persistence")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_run_preset)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
