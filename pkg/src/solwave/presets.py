"""Experiment presets, plain-text configuration, and run management.

Configuration files are INI-style (key = value lines under bracketed
sections) so that any language can parse them; every run directory gets a
meta.json capturing versions, seeds and tolerances, and CSV output is
written at full double precision.
"""

from __future__ import annotations

import configparser
import json
import platform
import warnings
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .charge import check_moments, check_wiener, make_admissible_density
from .diagnostics import extract_modulation, fit_decay, scattering_state
from .dynamics import SimConfig, run_nonlinear
from .errors import SolwaveError
from .grid import Grid3
from .soliton import (
    FieldPair,
    PhaseState,
    SolitonParams,
    soliton_state,
    tangent_frame,
)
from .symplectic import omega_matrix, project_transversal
from .soliton import LinState

FMT = "%.17g"


@dataclass
class ExperimentPreset:
    name: str
    n: int = 64
    box: float = 16.0
    base_width: float = 1.0
    amplitude: float = 0.25
    v: tuple = (0.3, 0.0, 0.0)
    b: tuple = (0.0, 0.0, 0.0)
    kind: str = "soliton"  # soliton | perturbed-soliton | custom-file
    perturbation_amplitude: float = 0.0
    perturbation_width: float = 1.0
    seed: int = 1
    t_end: float = 20.0
    dt_factor: float = 0.25
    record_every: int = 8
    delta: float = 0.25
    snapshot_dtype: str = "float64"
    analyze: bool = True
    custom_file: str = ""
    omega_grid: tuple = ()
    extra: dict = dc_field(default_factory=dict)

    def validate(self):
        if self.kind not in ("soliton", "perturbed-soliton", "custom-file", "spectrum-scan"):
            raise SolwaveError(f"unknown initial-condition kind {self.kind!r}")
        if self.kind == "custom-file" and not self.custom_file:
            raise SolwaveError("custom-file preset needs custom_file=...")
        np.asarray(self.v, dtype=float)
        if self.n < 16 or self.box <= 0:
            raise SolwaveError("bad grid parameters")


BUILTIN_PRESETS = {
    "soliton-persistence": dict(
        kind="soliton", v=(0.3, 0.0, 0.0), t_end=20.0, analyze=True
    ),
    "perturbed-soliton": dict(
        kind="perturbed-soliton",
        v=(0.3, 0.0, 0.0),
        perturbation_amplitude=0.01,
        perturbation_width=1.0,
        n=96,
        box=24.0,
        t_end=18.0,
        analyze=True,
    ),
    "spectrum-scan": dict(
        kind="spectrum-scan",
        v=(0.3, 0.0, 0.0),
        omega_grid=tuple(np.round(np.linspace(0.25, 4.0, 16), 6)),
        analyze=False,
    ),
}


def builtin_preset(name: str, **overrides) -> ExperimentPreset:
    if name not in BUILTIN_PRESETS:
        raise SolwaveError(
            f"unknown preset {name!r}; available: {sorted(BUILTIN_PRESETS)}"
        )
    kw = dict(BUILTIN_PRESETS[name])
    kw.update(overrides)
    return ExperimentPreset(name=name, **kw)


# -- config file round trip --------------------------------------------------


def preset_to_config(preset: ExperimentPreset) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp["grid"] = {"n": str(preset.n), "box": FMT % preset.box}
    cp["charge"] = {
        "base_width": FMT % preset.base_width,
        "amplitude": FMT % preset.amplitude,
    }
    cp["initial"] = {
        "kind": preset.kind,
        "v": " ".join(FMT % x for x in preset.v),
        "b": " ".join(FMT % x for x in preset.b),
        "perturbation_amplitude": FMT % preset.perturbation_amplitude,
        "perturbation_width": FMT % preset.perturbation_width,
        "seed": str(preset.seed),
        "custom_file": preset.custom_file,
    }
    cp["run"] = {
        "t_end": FMT % preset.t_end,
        "dt_factor": FMT % preset.dt_factor,
        "record_every": str(preset.record_every),
        "snapshot_dtype": preset.snapshot_dtype,
    }
    cp["analysis"] = {
        "delta": FMT % preset.delta,
        "analyze": str(preset.analyze),
    }
    if preset.omega_grid:
        cp["spectrum"] = {"omega_grid": " ".join(FMT % x for x in preset.omega_grid)}
    return cp


def load_config(path) -> ExperimentPreset:
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise SolwaveError(f"cannot read config {path}")
    g = cp["grid"] if "grid" in cp else {}
    c = cp["charge"] if "charge" in cp else {}
    i = cp["initial"] if "initial" in cp else {}
    r = cp["run"] if "run" in cp else {}
    a = cp["analysis"] if "analysis" in cp else {}
    s = cp["spectrum"] if "spectrum" in cp else {}
    vec = lambda text, d: tuple(float(x) for x in text.split()) if text else d
    preset = ExperimentPreset(
        name=Path(path).stem,
        n=int(g.get("n", 64)),
        box=float(g.get("box", 16.0)),
        base_width=float(c.get("base_width", 1.0)),
        amplitude=float(c.get("amplitude", 0.25)),
        kind=i.get("kind", "soliton"),
        v=vec(i.get("v", ""), (0.3, 0.0, 0.0)),
        b=vec(i.get("b", ""), (0.0, 0.0, 0.0)),
        perturbation_amplitude=float(i.get("perturbation_amplitude", 0.0)),
        perturbation_width=float(i.get("perturbation_width", 1.0)),
        seed=int(i.get("seed", 1)),
        custom_file=i.get("custom_file", ""),
        t_end=float(r.get("t_end", 20.0)),
        dt_factor=float(r.get("dt_factor", 0.25)),
        record_every=int(r.get("record_every", 8)),
        snapshot_dtype=r.get("snapshot_dtype", "float64"),
        delta=float(a.get("delta", 0.25)),
        analyze=a.get("analyze", "True").lower() in ("1", "true", "yes"),
        omega_grid=vec(s.get("omega_grid", ""), ()),
    )
    preset.validate()
    return preset


# -- initial data -------------------------------------------------------------


def transversal_bump(rho, grid, sigma, amplitude, width, seed) -> LinState:
    """Smooth random bump projected symplectically orthogonal to the frame.

    A Gaussian envelope at the soliton center modulates low-k random
    fields; the transversal projector at sigma removes the tangential
    part so the perturbation excites no secular motion at linear order.
    """
    rng = np.random.default_rng(seed)
    X, Y, Z = grid.xmesh()
    env = np.exp(
        -(
            (X - sigma.b[0]) ** 2 + (Y - sigma.b[1]) ** 2 + (Z - sigma.b[2]) ** 2
        )
        / (2.0 * width**2)
    )
    def smooth_field():
        coef = rng.standard_normal((3, 3, 3))
        f = np.zeros(grid.shape)
        for a1 in range(3):
            for a2 in range(3):
                for a3 in range(3):
                    f += coef[a1, a2, a3] * np.cos(
                        2 * np.pi * (a1 * X + a2 * Y + a3 * Z) / grid.box_length
                        + a1 + 2.0 * a2 + 3.0 * a3
                    )
        return f * env

    raw = LinState(
        FieldPair(grid, smooth_field(), smooth_field()),
        rng.standard_normal(3) * 0.1,
        rng.standard_normal(3) * 0.1,
    )
    frame = tangent_frame(rho, sigma.v, grid)
    om = omega_matrix(frame)
    z = project_transversal(raw, frame, om)
    # amplitude is the closeness d_beta = ||Z0||_beta (beta = 4 + 1/4)
    from .diagnostics import weighted_norm

    scale = amplitude / max(weighted_norm(z, 4.25, center=sigma.b), 1e-300)
    return LinState(
        FieldPair(grid, scale * z.fields.psi, scale * z.fields.pi),
        scale * z.Q,
        scale * z.P,
    )


def build_initial(preset: ExperimentPreset, rho, grid) -> PhaseState:
    sigma = SolitonParams(np.asarray(preset.b, float), np.asarray(preset.v, float))
    state = soliton_state(rho, sigma, grid)
    if preset.kind == "perturbed-soliton" and preset.perturbation_amplitude != 0.0:
        z = transversal_bump(
            rho,
            grid,
            sigma,
            preset.perturbation_amplitude,
            preset.perturbation_width,
            preset.seed,
        )
        state = PhaseState(
            FieldPair(
                grid, state.fields.psi + z.fields.psi, state.fields.pi + z.fields.pi
            ),
            state.q + z.Q,
            state.p + z.P,
        )
    elif preset.kind == "custom-file":
        data = np.load(preset.custom_file)
        state = PhaseState(
            FieldPair(grid, data["psi"], data["pi"]), data["q"], data["p"]
        )
    return state


# -- output writers -----------------------------------------------------------


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(FMT % x for x in row) + "\n")


def write_json(path, payload):
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, complex):
            return {"re": o.real, "im": o.imag}
        raise TypeError(f"not serializable: {type(o)}")

    Path(path).write_text(json.dumps(payload, indent=2, default=default) + "\n")


def write_meta(out_dir, preset: ExperimentPreset, extra=None):
    meta = {
        "solwave_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "preset": {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in vars(preset).items()
            if k != "extra"
        },
        "tolerances": {
            "projection_tol": 1e-10,
            "wiener_floor": 1e-12,
            "moment_tol": 1e-8,
            "drift_tol": 1e-6,
        },
    }
    if extra:
        meta.update(extra)
    write_json(Path(out_dir) / "meta.json", meta)


def dump_trajectory(traj, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "particle.csv",
        ["t", "qx", "qy", "qz", "px", "py", "pz", "qdotx", "qdoty", "qdotz"],
        np.column_stack(
            [traj.particle_times, traj.particle_q, traj.particle_p, traj.particle_qdot]
        ),
    )
    write_csv(
        out / "energy.csv",
        ["t", "energy"],
        np.column_stack([traj.times, traj.energies]),
    )
    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)
    grid = traj.states[0].grid
    mid = grid.n // 2
    for t, st in zip(traj.times, traj.states):
        rows = np.column_stack(
            [
                grid.x1,
                st.fields.psi[:, mid, mid],
                st.fields.pi[:, mid, mid],
            ]
        )
        write_csv(snapdir / f"slice_t{t:08.3f}.csv", ["x", "psi", "pi"], rows)
    np.savez_compressed(
        out / "fields.npz",
        times=traj.times,
        psi=np.stack([s.fields.psi for s in traj.states]),
        pi=np.stack([s.fields.pi for s in traj.states]),
        q=np.stack([s.q for s in traj.states]),
        p=np.stack([s.p for s in traj.states]),
    )


def analyze_trajectory(traj, rho, delta, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    track = extract_modulation(traj, rho, delta)
    write_csv(
        out / "modulation.csv",
        [
            "t",
            "bx", "by", "bz",
            "vx", "vy", "vz",
            "cdotx", "cdoty", "cdotz",
            "vdotx", "vdoty", "vdotz",
            "z_norm", "t_norm", "residual",
        ],
        np.column_stack(
            [
                track.times,
                track.b,
                track.v,
                track.cdot,
                track.vdot,
                track.Z_norms,
                track.T_norms,
                track.residuals,
            ]
        ),
    )
    decay = None
    if np.max(track.Z_norms) > 1e-12:
        t0 = 5.0
        t1 = float(track.times[-1])
        if t1 > t0 and np.count_nonzero(track.times >= t0) >= 10:
            ft = fit_decay(track.times, np.maximum(track.Z_norms, 1e-300), (t0, t1))
            decay = {
                "z_norm_exponent": ft.exponent,
                "prefactor": ft.prefactor,
                "window": list(ft.window),
                "fit_residual": ft.residual,
                "n_samples": ft.n_samples,
            }
            write_json(out / "decay.json", decay)
        scat = scattering_state(traj, rho)
        write_json(
            out / "scattering.json",
            {
                "v_plus": scat["v_plus"],
                "a_plus": scat["a_plus"],
                "cauchy": scat["cauchy"],
                "cauchy_times": scat["cauchy_times"],
                "converged": scat["converged"],
                "qdot_spread": scat["qdot_spread"],
            },
        )
    return track, decay


def run_preset(preset: ExperimentPreset, out_dir) -> dict:
    """Execute charge -> soliton -> simulate -> analyze, writing artifacts.

    Partial outputs are kept next to a FAILED marker when a stage raises.
    """
    preset.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"name": preset.name, "out_dir": str(out), "status": "ok"}
    try:
        with (out / "config.ini").open("w") as fh:
            preset_to_config(preset).write(fh)
        grid = Grid3(preset.n, preset.box)
        rho = make_admissible_density(preset.base_width, preset.amplitude, grid)
        write_json(
            out / "charge.json",
            {
                "wiener": {
                    "min_abs": rho.wiener.min_abs,
                    "floor": rho.wiener.floor,
                    "passed": rho.wiener.passed,
                },
                "moments": {
                    "worst_rel": rho.moments.worst_rel,
                    "passed": rho.moments.passed,
                },
                "effective_radius": rho.effective_radius,
            },
        )
        if preset.kind == "spectrum-scan":
            from .cli import spectrum_rows

            rows = spectrum_rows(rho, np.asarray(preset.v, float), preset.omega_grid)
            write_csv(
                out / "spectrum.csv",
                ["omega", "f1_re", "f1_im", "f_re", "f_im", "detM_re", "detM_im", "imF_sign_ok"],
                rows,
            )
            write_meta(out, preset)
            return report

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
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            traj = run_nonlinear(cfg)
        dump_trajectory(traj, out)
        if preset.analyze:
            track, decay = analyze_trajectory(traj, rho, preset.delta, out)
            report["z_norm_final"] = float(track.Z_norms[-1]) if len(track.Z_norms) else 0.0
            if decay:
                report["decay"] = decay
        write_meta(out, preset, {"wrap_margin": traj.meta.get("wrap_margin")})
    except Exception as exc:  # keep partial outputs, mark the failure
        (out / "FAILED").write_text(f"{type(exc).__name__}: {exc}\n")
        report["status"] = "failed"
        report["error"] = f"{type(exc).__name__}: {exc}"
        raise
    return report
