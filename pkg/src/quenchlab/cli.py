"""Experiment runner: configuration, orchestration, persistence.

Configs are plain text, one `section.key = value` per line, '#' comments.
Every run echoes its configuration into a manifest that is itself a valid
config, so any run can be reproduced from its manifest.  Numeric CSV
output is bitwise reproducible for identical configs.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from . import farfield, melnikov, spectral
from .errors import ConfigError, MissingBaseline, QuenchLabError
from .measure import (ContactRecorder, fit_contact_angle, measure_drift,
                      zero_level_set)
from .model import ModelParams
from .profiles1d import (Grid1D, cy_from_angle, export_profile,
                         solve_quench_front, solve_traveling_wave)
from .quench2d import (Field2D, SemiImplicitStepper, export_field_csv,
                       run_to_steady, solve_theta, write_field)

MODES = ("profile", "theta", "simulate", "melnikov", "sweep", "spectrum",
         "bordered", "compare")

OUTPUT_ROOT_ENV = "QUENCHLAB_OUTPUT_ROOT"


@dataclass
class ExperimentConfig:
    """Validated flat configuration for one experiment run."""

    mode: str = "theta"
    # model
    c_x: float = 0.5
    c_y: float = 0.0
    alpha: float = 0.0
    g_left: tuple = ()
    g_right: tuple = ()
    # 1D grid
    grid1d_half_width: float = 30.0
    grid1d_h: float = 0.025
    # 2D grid
    grid2d_half_width_x: float = 60.0
    grid2d_half_width_y: float = 60.0
    grid2d_h: float = 0.25
    # time stepping
    solver_dt: float = 0.25
    solver_tol: float = 1e-8
    solver_max_steps: int = 20000
    solver_threads: int = 1
    # sweep
    sweep_alphas: tuple = ()
    # bordered solve
    bordered_half_width: float = 30.0
    bordered_h: float = 0.25
    bordered_R: float = 12.0
    bordered_eta: float = 0.0  # 0 means min(c_x, 1)/4
    bordered_ridge: float = 1e-5
    # angle measurement
    measure_window_lo: float = -35.0
    measure_window_hi: float = -10.0
    measure_round_steps: int = 400
    measure_max_rounds: int = 12
    measure_drift_tol: float = 3e-4
    measure_steady_tol: float = 1e-7
    # compare
    compare_table: str = ""
    # output
    output_dir: str = "."

    def model_params(self, alpha: float | None = None,
                     c_y: float | None = None) -> ModelParams:
        return ModelParams(c_x=self.c_x,
                           c_y=self.c_y if c_y is None else c_y,
                           alpha=self.alpha if alpha is None else alpha,
                           g_left=self.g_left, g_right=self.g_right)

    def grid1d(self) -> Grid1D:
        return Grid1D.symmetric(self.grid1d_half_width, self.grid1d_h)

    def resolved_output_dir(self) -> str:
        root = os.environ.get(OUTPUT_ROOT_ENV, "")
        out = self.output_dir
        if root and not os.path.isabs(out):
            out = os.path.join(root, out)
        return out


#: maps config-file keys "section.key" to ExperimentConfig attributes
_KEYMAP = {
    "mode": "mode",
    "model.c_x": "c_x",
    "model.c_y": "c_y",
    "model.alpha": "alpha",
    "model.g_left": "g_left",
    "model.g_right": "g_right",
    "grid1d.half_width": "grid1d_half_width",
    "grid1d.h": "grid1d_h",
    "grid2d.half_width_x": "grid2d_half_width_x",
    "grid2d.half_width_y": "grid2d_half_width_y",
    "grid2d.h": "grid2d_h",
    "solver.dt": "solver_dt",
    "solver.tol": "solver_tol",
    "solver.max_steps": "solver_max_steps",
    "solver.threads": "solver_threads",
    "sweep.alphas": "sweep_alphas",
    "bordered.half_width": "bordered_half_width",
    "bordered.h": "bordered_h",
    "bordered.R": "bordered_R",
    "bordered.eta": "bordered_eta",
    "bordered.ridge": "bordered_ridge",
    "measure.window_lo": "measure_window_lo",
    "measure.window_hi": "measure_window_hi",
    "measure.round_steps": "measure_round_steps",
    "measure.max_rounds": "measure_max_rounds",
    "measure.drift_tol": "measure_drift_tol",
    "measure.steady_tol": "measure_steady_tol",
    "compare.table": "compare_table",
    "output.dir": "output_dir",
}

_ATTR_TO_KEY = {v: k for k, v in _KEYMAP.items()}


def _parse_value(attr: str, raw: str):
    kind = ExperimentConfig.__dataclass_fields__[attr].type
    raw = raw.strip()
    if attr in ("g_left", "g_right", "sweep_alphas"):
        if not raw:
            return ()
        return tuple(float(tok) for tok in raw.split(","))
    if attr in ("mode", "output_dir", "compare_table"):
        return raw
    if attr in ("solver_max_steps", "solver_threads", "measure_round_steps",
                "measure_max_rounds"):
        return int(raw)
    return float(raw)


def apply_setting(cfg: ExperimentConfig, key: str, raw: str):
    if key not in _KEYMAP:
        raise ConfigError(f"unknown configuration key {key!r}")
    attr = _KEYMAP[key]
    try:
        value = _parse_value(attr, raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
    setattr(cfg, attr, value)


def parse_config(path: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse a key-value config file (comments and blank lines ignored)."""
    cfg = base or ExperimentConfig()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            apply_setting(cfg, key, raw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig):
    if cfg.mode not in MODES:
        raise ConfigError(f"unknown mode {cfg.mode!r}; choose one of {MODES}")
    if cfg.c_x < 0:
        raise ConfigError("model.c_x must be >= 0")
    if cfg.solver_dt <= 0 or cfg.solver_tol <= 0:
        raise ConfigError("solver.dt and solver.tol must be positive")
    if cfg.solver_threads < 1:
        raise ConfigError("solver.threads must be >= 1")
    if len(cfg.g_left) > 4 or len(cfg.g_right) > 4:
        raise ConfigError("perturbation polynomials must have degree <= 3")


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(f"{v:.17g}" for v in value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_manifest(cfg: ExperimentConfig, path: str, timings: dict):
    """Config echo plus versions and timings; re-parses as a config."""
    import scipy

    lines = ["# quenchlab run manifest",
             f"# versions: quenchlab=0.1.0 numpy={np.__version__} scipy={scipy.__version__}"]
    for f in dc_fields(ExperimentConfig):
        lines.append(f"{_ATTR_TO_KEY[f.name]} = {_fmt(getattr(cfg, f.name))}")
    for name, seconds in timings.items():
        lines.append(f"# timing.{name}_s = {seconds:.3f}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# steady-angle measurement (time marching with drift-corrected frame)
# ---------------------------------------------------------------------------

def measure_steady_angle(p: ModelParams, cfg: ExperimentConfig,
                         psi_seed: float = 0.0, verbose: bool = False) -> dict:
    """Measure the selected interface angle by comoving time marching.

    Seeds the vertical frame speed from the geometric speed relation at a
    guessed angle, then alternates short marching rounds with frame-speed
    corrections by the measured contact-point drift until the contact
    point is stationary; the angle is fitted on the final field's nodal
    line in the left farfield.
    """
    from .model import stable_zeros

    branches = stable_zeros(p.alpha, p)
    grid1 = cfg.grid1d()
    c_y = cy_from_angle(p.alpha, psi_seed, p, grid1)
    template = Field2D.on_rectangle(cfg.grid2d_half_width_x,
                                    cfg.grid2d_half_width_y, cfg.grid2d_h)
    u = template.copy_with(
        np.where(template.x[None, :] < 0,
                 np.where(template.y[:, None] > 0, branches.z_plus, branches.z_minus),
                 branches.z_zero))
    drift = np.nan
    rate = np.nan
    track_steps = int(np.ceil(12.0 / cfg.solver_dt))
    for rnd in range(cfg.measure_max_rounds):
        pp = p.replace(c_y=c_y)
        stepper = SemiImplicitStepper(u, pp, cfg.solver_dt)
        res = run_to_steady(u, pp, cfg.solver_dt, tol=cfg.measure_steady_tol,
                            max_steps=cfg.measure_round_steps, stepper=stepper)
        # fixed-length measurement leg: the drift fit needs a time span
        # regardless of how quickly the relaxation round converged
        rec = ContactRecorder(res.field)
        res = run_to_steady(res.field, pp, cfg.solver_dt, tol=0.0,
                            max_steps=track_steps, recorder=rec,
                            record_every=2, stepper=stepper)
        u = res.field
        rate = res.final_update_rate
        drift = measure_drift(rec.track())
        if verbose:
            print(f"  round {rnd}: c_y={c_y:+.6f} rate={rate:.2e} "
                  f"drift={drift:+.6f}")
        if abs(drift) < cfg.measure_drift_tol and rnd > 0:
            break
        c_y += drift
    nodal = zero_level_set(u)
    m = fit_contact_angle(nodal, (cfg.measure_window_lo, cfg.measure_window_hi))
    return {"psi": m.psi, "phi": m.phi, "c_y": c_y, "drift": drift,
            "measurement": m, "field": u, "update_rate": rate}


def _melnikov_report(cfg: ExperimentConfig) -> melnikov.MelnikovReport:
    """Selection integrals at alpha = 0 on a prediction-sized grid."""
    half = min(cfg.grid2d_half_width_x, cfg.grid2d_half_width_y, 30.0)
    theta = solve_theta(cfg.c_x, half, half, h=min(cfg.grid2d_h, 0.25),
                        dt=cfg.solver_dt, tol=1e-9,
                        max_steps=cfg.solver_max_steps)
    p0 = cfg.model_params(alpha=0.0)
    grid = Grid1D.symmetric(half, cfg.grid1d_h)
    u_top = solve_quench_front("top", p0, grid)
    u_bottom = solve_quench_front("bottom", p0, grid)
    return melnikov.build_report(theta, u_top, u_bottom, p0)


# ---------------------------------------------------------------------------
# modes
# ---------------------------------------------------------------------------

def _run_profile(cfg: ExperimentConfig, out: str, log) -> None:
    p = cfg.model_params()
    grid = cfg.grid1d()
    for side in ("top", "bottom"):
        prof = solve_quench_front(side, p, grid)
        export_profile(prof, os.path.join(out, f"front_{side}"), p)
        log(f"front_{side}: residual {prof.residual_norm:.2e}")
    wave = solve_traveling_wave(p, grid)
    export_profile(wave.profile, os.path.join(out, "wave"), p)
    with open(os.path.join(out, "wave.meta"), "a") as fh:
        fh.write(f"speed = {wave.speed:.17g}\n")
    log(f"wave: c_n = {wave.speed:.8f}")


def _run_theta(cfg: ExperimentConfig, out: str, log) -> None:
    theta = solve_theta(cfg.c_x, cfg.grid2d_half_width_x,
                        cfg.grid2d_half_width_y, h=cfg.grid2d_h,
                        dt=cfg.solver_dt, tol=cfg.solver_tol,
                        max_steps=cfg.solver_max_steps)
    write_field(theta, os.path.join(out, "theta.qnch"))
    export_field_csv(theta, os.path.join(out, "theta.csv"))
    log(f"theta: {theta.nx}x{theta.ny} nodes")


def _run_simulate(cfg: ExperimentConfig, out: str, log) -> None:
    from .model import stable_zeros

    p = cfg.model_params()
    branches = stable_zeros(p.alpha, p)
    template = Field2D.on_rectangle(cfg.grid2d_half_width_x,
                                    cfg.grid2d_half_width_y, cfg.grid2d_h)
    u0 = template.copy_with(
        np.where(template.x[None, :] < 0,
                 np.where(template.y[:, None] > 0, branches.z_plus, branches.z_minus),
                 branches.z_zero))
    rec = ContactRecorder(u0)
    res = run_to_steady(u0, p, cfg.solver_dt, tol=cfg.solver_tol,
                        max_steps=cfg.solver_max_steps, recorder=rec)
    write_field(res.field, os.path.join(out, "final.qnch"))
    track = rec.track()
    with open(os.path.join(out, "contact_track.csv"), "w") as fh:
        fh.write("t,y_contact\n")
        for t, y in zip(track.times, track.y_contact):
            fh.write(f"{t:.17g},{y:.17g}\n")
    log(f"simulate: steps={res.steps} converged={res.converged} "
        f"rate={res.final_update_rate:.2e}")


def _run_melnikov(cfg: ExperimentConfig, out: str, log) -> None:
    report = _melnikov_report(cfg)
    melnikov.write_report(report, os.path.join(out, "melnikov_report.txt"))
    log(f"melnikov: m_psi={report.m_psi:.6f} m_alpha={report.m_alpha:.6f} "
        f"dphi_dalpha={report.dphi_dalpha:.6f}")


def _run_sweep(cfg: ExperimentConfig, out: str, log) -> None:
    table = os.path.join(out, "sweep.csv")
    with open(table, "w") as fh:
        fh.write("alpha,psi_measured,psi_predicted,drift\n")
    if not cfg.sweep_alphas:
        log("sweep: empty alpha list, wrote header only")
        return
    report = _melnikov_report(cfg)
    log(f"sweep: prediction dphi_dalpha = {report.dphi_dalpha:.6f}")
    for alpha in cfg.sweep_alphas:
        p = cfg.model_params(alpha=alpha)
        psi_pred = report.dphi_dalpha * alpha
        result = measure_steady_angle(p, cfg, psi_seed=psi_pred)
        with open(table, "a") as fh:
            fh.write(f"{alpha:.17g},{result['psi']:.17g},{psi_pred:.17g},"
                     f"{result['drift']:.17g}\n")
        log(f"  alpha={alpha:+.3f}: psi={result['psi']:+.6f} "
            f"(predicted {psi_pred:+.6f}) drift={result['drift']:+.2e}")


def _run_spectrum(cfg: ExperimentConfig, out: str, log) -> None:
    p = cfg.model_params(alpha=0.0)
    grid = cfg.grid1d()
    prof = solve_quench_front("top", p, grid)
    op = spectral.quench_front_operator(prof, cfg.c_x)
    top_eig = spectral.max_real_eig_1d(op)
    spectral.append_report(os.path.join(out, "spectrum_report.txt"), {
        "c_x": f"{cfg.c_x:.17g}",
        "max_real_eig_front": f"{top_eig:.17g}",
    })
    log(f"spectrum: max real eigenvalue {top_eig:.6f}")


def _run_bordered(cfg: ExperimentConfig, out: str, log) -> None:
    p = cfg.model_params()
    spec = farfield.PartitionSpec(R=cfg.bordered_R)
    eta = cfg.bordered_eta if cfg.bordered_eta > 0 else None
    cc = farfield.solve_bordered(cfg.alpha, p, spec, eta=eta,
                                 half_width=cfg.bordered_half_width,
                                 h=cfg.bordered_h, lam=cfg.bordered_ridge)
    farfield.save_correction(cc, os.path.join(out, "core_correction"))
    log(f"bordered: psi={cc.psi:+.8f} residual={cc.weighted_residual:.2e} "
        f"iterations={cc.iterations}")


def compare_prediction(table_path: str) -> dict:
    """Centered-difference measured slope vs the prediction in a sweep table.

    Uses the smallest +-alpha pair; requires an alpha = 0 row as baseline.
    """
    rows = {}
    with open(table_path) as fh:
        header = fh.readline().strip().split(",")
        if header[:3] != ["alpha", "psi_measured", "psi_predicted"]:
            raise MissingBaseline(f"{table_path} is not a sweep table")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 3:
                continue
            rows[float(parts[0])] = (float(parts[1]), float(parts[2]))
    if 0.0 not in rows:
        raise MissingBaseline("sweep table lacks the alpha = 0 baseline")
    pairs = sorted(a for a in rows if a > 0 and -a in rows)
    if not pairs:
        raise MissingBaseline("sweep table lacks a +-alpha pair")
    a = pairs[0]
    measured = (rows[a][0] - rows[-a][0]) / (2 * a)
    predicted = (rows[a][1] - rows[-a][1]) / (2 * a)
    deviation = (measured - predicted) / predicted if predicted != 0 else np.inf
    return {"alpha_pair": a, "slope_measured": measured,
            "slope_predicted": predicted, "relative_deviation": deviation,
            "psi_at_zero": rows[0.0][0]}


def _run_compare(cfg: ExperimentConfig, out: str, log) -> None:
    table = cfg.compare_table or os.path.join(out, "sweep.csv")
    summary = compare_prediction(table)
    path = os.path.join(out, "compare_report.txt")
    with open(path, "w") as fh:
        for key, val in summary.items():
            fh.write(f"{key} = {val:.17g}\n")
    log(f"compare: measured {summary['slope_measured']:.5f} vs predicted "
        f"{summary['slope_predicted']:.5f} "
        f"({100 * summary['relative_deviation']:+.2f}%)")


_MODE_RUNNERS = {
    "profile": _run_profile,
    "theta": _run_theta,
    "simulate": _run_simulate,
    "melnikov": _run_melnikov,
    "sweep": _run_sweep,
    "spectrum": _run_spectrum,
    "bordered": _run_bordered,
    "compare": _run_compare,
}


def run(cfg: ExperimentConfig, log=print) -> int:
    """Execute the configured pipeline; artifacts land in the output dir."""
    validate_config(cfg)
    out = cfg.resolved_output_dir()
    os.makedirs(out, exist_ok=True)
    t0 = time.perf_counter()
    _MODE_RUNNERS[cfg.mode](cfg, out, log)
    write_manifest(cfg, os.path.join(out, "manifest.txt"),
                   {"total": time.perf_counter() - t0})
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quenchlab",
        description="directional-quenching interface laboratory")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode, help=f"run the {mode} pipeline")
        sp.add_argument("--config", help="key-value config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--out", help="output directory (overrides output.dir)")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else ExperimentConfig()
        cfg.mode = args.mode
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, raw = item.split("=", 1)
            apply_setting(cfg, key.strip(), raw)
        if args.out:
            cfg.output_dir = args.out
        return run(cfg)
    except (QuenchLabError, OSError) as exc:
        print(f"quenchlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
