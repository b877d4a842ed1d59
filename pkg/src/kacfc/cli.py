"""Command-line front end.

Subcommands: solve, particles, fir, limits, figure1. Each accepts
``--config FILE`` (a flat JSON object, schema-checked, unknown keys
rejected) with explicit flags overriding the file. All outputs are UTF-8
CSV/JSON plus the binary state files of the trajectory layout; floats are
written with repr so reruns are byte-identical.

Exit codes: 0 success, 2 ill-prepared data, 3 property-assertion failure,
64 usage errors (bad flags, bad config, empty sweeps). Any other module
error prints one machine-readable JSON object on stderr and exits 1.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .asymptotics import SweepSpec, run_diffusive_sweep, run_hyperbolic_sweep
from .errors import IllPreparedError
from .functionals import fir_check
from .measures import (DensityFluxPair, GridMeasure, KineticState,
                       ModelParams, TorusGrid, make_bump, make_dirac,
                       make_step, make_uniform, mollify_state, wasserstein1)
from .particles import EnsembleConfig, ensemble_run
from .solver import (SolverConfig, Trajectory, heat_reference, solve,
                     step_spectral)

USAGE_EXIT = 64
PROPERTY_EXIT = 3
ILL_PREPARED_EXIT = 2


class PropertyFailure(AssertionError):
    """A figure-level physical property did not hold."""


class _Parser(argparse.ArgumentParser):
    """argparse with the usage exit code this tool documents."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _error_json(exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _load_config(path: str | None, schema: dict, parser: _Parser) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {path}: {exc}")
    if not isinstance(raw, dict):
        parser.error(f"config {path} must hold a JSON object")
    out = {}
    for key, value in raw.items():
        if key not in schema:
            parser.error(f"unknown config key {key!r} (expected one of "
                         f"{sorted(schema)})")
        try:
            out[key] = schema[key](value)
        except (TypeError, ValueError) as exc:
            parser.error(f"config key {key!r}: {exc}")
    return out


def _merge(defaults: dict, config: dict, args: argparse.Namespace) -> dict:
    merged = dict(defaults)
    merged.update(config)
    for key in defaults:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    return merged


def _float_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    parts = [p for p in str(text).split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _initial_state(kind: str, grid: TorusGrid, params: ModelParams,
                   concentration: float, drift: float) -> KineticState:
    if kind == "uniform":
        return make_uniform(grid, params)
    if kind == "bump":
        return make_bump(grid, params, concentration=concentration,
                         drift_fraction=drift)
    if kind == "dirac":
        return make_dirac(grid, params)
    if kind == "step":
        return make_step(grid, params)
    raise ValueError(f"unknown initial datum {kind!r}")


def _write_csv(path: str, header: list, columns: list) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(columns[0])):
            fh.write(",".join(repr(float(c[i])) for c in columns) + "\n")


# --------------------------------------------------------------------------
# solve
# --------------------------------------------------------------------------

_SOLVE_SCHEMA = {
    "speed": float, "switch_rate": float, "n_cells": int, "t_final": float,
    "dt": float, "scheme": str, "snapshot_every": int, "initial": str,
    "concentration": float, "drift": float, "out": str,
}

_SOLVE_DEFAULTS = {
    "speed": 2.0, "switch_rate": 0.5, "n_cells": 512, "t_final": 1.0,
    "dt": None, "scheme": "strang_split", "snapshot_every": 1,
    "initial": "bump", "concentration": 4.0, "drift": 0.0, "out": "run_solve",
}


def cmd_solve(args: argparse.Namespace, parser: _Parser) -> int:
    cfg = _merge(_SOLVE_DEFAULTS, _load_config(args.config, _SOLVE_SCHEMA,
                                               parser), args)
    grid = TorusGrid(cfg["n_cells"])
    params = ModelParams(speed=cfg["speed"], switch_rate=cfg["switch_rate"])
    state = _initial_state(cfg["initial"], grid, params,
                           cfg["concentration"], cfg["drift"])
    dt_request = cfg["dt"] if cfg["dt"] is not None else grid.dx / params.speed
    sc = SolverConfig(dt=dt_request, t_final=cfg["t_final"],
                      scheme=cfg["scheme"],
                      snapshot_every=cfg["snapshot_every"])
    traj = solve(state, sc)
    if abs(traj.dt - dt_request) > 1e-12 * dt_request:
        print(f"warning: dt rounded from {dt_request!r} to {traj.dt!r} "
              "(integer-cell transport)", file=sys.stderr)
    traj.save(cfg["out"])
    final = traj.states[-1]
    from .functionals import entropy_vs_uniform
    print(f"steps={len(traj.times) - 1} dt={traj.dt!r}")
    print(f"mass initial={state.mass()!r} final={final.mass()!r}")
    print(f"entropy initial={entropy_vs_uniform(state)!r} "
          f"final={entropy_vs_uniform(final)!r}")
    print(f"trajectory written to {cfg['out']}")
    return 0


# --------------------------------------------------------------------------
# particles
# --------------------------------------------------------------------------

_PARTICLES_SCHEMA = {
    "n_particles": int, "seed": int, "speed": float, "switch_rate": float,
    "bin_cells": int, "times": _float_list, "initial": str,
    "concentration": float, "drift": float, "out": str, "compare": bool,
}

_PARTICLES_DEFAULTS = {
    "n_particles": 10000, "seed": 0, "speed": 2.0, "switch_rate": 0.5,
    "bin_cells": 512, "times": (0.0, 0.25, 0.5), "initial": "bump",
    "concentration": 4.0, "drift": 0.0, "out": "run_particles",
    "compare": False,
}


def cmd_particles(args: argparse.Namespace, parser: _Parser) -> int:
    cfg = _merge(_PARTICLES_DEFAULTS,
                 _load_config(args.config, _PARTICLES_SCHEMA, parser), args)
    cfg["times"] = _float_list(cfg["times"])
    grid = TorusGrid(cfg["bin_cells"])
    params = ModelParams(speed=cfg["speed"], switch_rate=cfg["switch_rate"])
    state = _initial_state(cfg["initial"], grid, params,
                           cfg["concentration"], cfg["drift"])
    ens_cfg = EnsembleConfig(n_particles=cfg["n_particles"], params=params,
                             seed=cfg["seed"], snapshot_times=cfg["times"],
                             bin_cells=cfg["bin_cells"])
    result = ensemble_run(state, ens_cfg)
    result.save(cfg["out"])
    print(f"particles={cfg['n_particles']} seed={cfg['seed']} "
          f"snapshots={len(cfg['times'])}")
    if cfg["compare"]:
        rows_t, rows_w = [], []
        for t, emp in zip(result.times, result.states):
            # one spectral step of size t is exact for any t > 0
            ref_state = state if t == 0 else step_spectral(state, float(t))[0]
            rows_t.append(float(t))
            rows_w.append(wasserstein1(emp.rho(), ref_state.rho()))
        _write_csv(os.path.join(cfg["out"], "compare.csv"), ["t", "w1"],
                   [rows_t, rows_w])
        for t, w in zip(rows_t, rows_w):
            print(f"t={t!r} W1={w!r}")
    return 0


# --------------------------------------------------------------------------
# fir
# --------------------------------------------------------------------------

_FIR_SCHEMA = {
    "speed": float, "switch_rate": float, "n_cells": int, "t_final": float,
    "dt": float, "initial": str, "concentration": float, "drift": float,
    "mollify": float, "out": str,
}

_FIR_DEFAULTS = {
    "speed": 2.0, "switch_rate": 0.5, "n_cells": 512, "t_final": 1.0,
    "dt": None, "initial": "bump", "concentration": 4.0, "drift": 0.0,
    "mollify": None, "out": "run_fir",
}


def cmd_fir(args: argparse.Namespace, parser: _Parser) -> int:
    cfg = _merge(_FIR_DEFAULTS, _load_config(args.config, _FIR_SCHEMA,
                                             parser), args)
    grid = TorusGrid(cfg["n_cells"])
    params = ModelParams(speed=cfg["speed"], switch_rate=cfg["switch_rate"])
    state = _initial_state(cfg["initial"], grid, params,
                           cfg["concentration"], cfg["drift"])
    dt_request = cfg["dt"] if cfg["dt"] is not None else grid.dx / params.speed
    traj = solve(state, SolverConfig(dt=dt_request, t_final=cfg["t_final"]))
    report = fir_check(traj, mollify_eps=cfg["mollify"])
    os.makedirs(cfg["out"], exist_ok=True)
    report.write(os.path.join(cfg["out"], "report.csv"),
                 os.path.join(cfg["out"], "report.json"))
    print(f"min slack={report.fir_slack!r} tolerance={report.slack_tolerance!r}")
    print(f"entropy {report.entropy_initial!r} -> {report.entropy_final!r} "
          f"nonincreasing={report.entropy_nonincreasing()}")
    print(f"rate value={report.rate_value!r}")
    print(f"report written to {cfg['out']}")
    return 0


# --------------------------------------------------------------------------
# limits
# --------------------------------------------------------------------------

_LIMITS_SCHEMA = {
    "mode": str, "alpha": float, "speeds": _float_list, "rates": _float_list,
    "speed": float, "base_cells": int, "t_final": float, "n_snapshots": int,
    "concentration": float, "drift": float, "out": str,
}

_LIMITS_DEFAULTS = {
    "mode": None, "alpha": 4.0, "speeds": (), "rates": (), "speed": 2.0,
    "base_cells": 64, "t_final": 0.4, "n_snapshots": 80,
    "concentration": None, "drift": 0.0, "out": "run_limits",
}


def cmd_limits(args: argparse.Namespace, parser: _Parser) -> int:
    cfg = _merge(_LIMITS_DEFAULTS, _load_config(args.config, _LIMITS_SCHEMA,
                                                parser), args)
    mode = cfg["mode"]
    if mode == "diffusive":
        values = _float_list(cfg["speeds"])
        if len(values) < 2:
            parser.error("limits diffusive needs --V with at least two speeds")
        conc = cfg["concentration"] if cfg["concentration"] is not None else 0.05
        spec = SweepSpec(mode="diffusive", values=values, alpha=cfg["alpha"],
                         base_cells=cfg["base_cells"], t_final=cfg["t_final"],
                         n_snapshots=cfg["n_snapshots"], concentration=conc)
        record = run_diffusive_sweep(spec)
    elif mode == "hyperbolic":
        values = _float_list(cfg["rates"])
        if len(values) < 2:
            parser.error("limits hyperbolic needs --lambda with at least two "
                         "rates")
        conc = cfg["concentration"] if cfg["concentration"] is not None else 2.0
        spec = SweepSpec(mode="hyperbolic", values=values, speed=cfg["speed"],
                         base_cells=cfg["base_cells"], t_final=cfg["t_final"],
                         n_snapshots=cfg["n_snapshots"], concentration=conc,
                         drift_fraction=cfg["drift"])
        record = run_hyperbolic_sweep(spec)
    else:
        parser.error("limits mode must be 'diffusive' or 'hyperbolic'")
    record.write(cfg["out"])
    print(f"mode={record.mode} parameters={[float(v) for v in record.parameters]}")
    print(f"sup W1 errors={[float(e) for e in record.errors]}")
    print(f"log-log slope={record.slope!r}")
    print(f"records written to {cfg['out']}")
    return 0


# --------------------------------------------------------------------------
# figure1
# --------------------------------------------------------------------------

_FIGURE1_SCHEMA = {
    "speed": float, "switch_rate": float, "n_cells": int, "times": _float_list,
    "mollify": float, "out": str,
}

_FIGURE1_DEFAULTS = {
    "speed": 2.0, "switch_rate": 0.5, "n_cells": 512,
    "times": (0.0, 0.02, 0.05, 0.1), "mollify": 1e-3, "out": "run_figure1",
}

_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Plot the profile CSVs written next to this script.\"\"\"
import csv
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(here, name)) as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    cols = list(zip(*[[float(v) for v in r] for r in rows[1:]]))
    return header, cols


fig, axes = plt.subplots(1, 3, figsize=(13, 4))
for ax, name, title in zip(
        axes,
        ("heat_profiles.csv", "fc_profiles.csv", "step_profiles.csv"),
        ("heat flow from a point mass", "kinetic density from a point mass",
         "step datum at the final time")):
    header, cols = read(name)
    for label, col in zip(header[1:], cols[1:]):
        ax.plot(cols[0], col, label=label)
    ax.set_title(title)
    ax.set_xlabel("x")
    ax.legend(fontsize=7)
fig.tight_layout()
out = os.path.join(here, "figure1.png")
fig.savefig(out, dpi=150)
print(out)
"""


def cmd_figure1(args: argparse.Namespace, parser: _Parser) -> int:
    cfg = _merge(_FIGURE1_DEFAULTS,
                 _load_config(args.config, _FIGURE1_SCHEMA, parser), args)
    cfg["times"] = _float_list(cfg["times"])
    grid = TorusGrid(cfg["n_cells"])
    params = ModelParams(speed=cfg["speed"], switch_rate=cfg["switch_rate"])
    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    dt = grid.dx / params.speed
    # requested times snap to the step grid so the kinetic snapshots are exact
    times = sorted({round(t / dt) * dt for t in cfg["times"]})
    horizon = max(times)
    if horizon <= 0:
        parser.error("figure1 needs at least one positive time")
    x0 = 0.5
    dirac = make_dirac(grid, params, x0=x0)

    traj = solve(dirac, SolverConfig(dt=dt, t_final=horizon))
    snap_at = {}
    for t, s in zip(traj.times, traj.states):
        snap_at[round(float(t), 12)] = s
    fc_states = [snap_at[round(float(t), 12)] for t in times]
    heat_states = heat_reference(dirac.rho(), params.alpha, times)

    # property assertions
    v = params.speed
    for t, s in zip(times, fc_states):
        radius = v * t + grid.dx
        dist = np.abs(grid.centers() - x0)
        dist = np.minimum(dist, 1.0 - dist)
        outside = float(np.sum(s.rho().weights[dist > radius]))
        if outside > 1e-10:
            raise PropertyFailure(
                f"kinetic mass {outside!r} outside the light cone at t={t}")
    for t, h in zip(times, heat_states):
        if t >= 1e-3 and np.any(h.densities() < 1e-30):
            raise PropertyFailure(
                f"heat density below the positivity floor at t={t}")

    xs = grid.centers()
    _write_csv(os.path.join(out_dir, "heat_profiles.csv"),
               ["x"] + [f"t={t!r}" for t in times],
               [xs] + [h.densities() for h in heat_states])
    _write_csv(os.path.join(out_dir, "fc_profiles.csv"),
               ["x"] + [f"t={t!r}" for t in times],
               [xs] + [s.rho().densities() for s in fc_states])

    step = make_step(grid, params)
    step_traj = solve(step, SolverConfig(dt=dt, t_final=horizon))
    step_heat = heat_reference(step.rho(), params.alpha, [horizon])[0]
    _write_csv(os.path.join(out_dir, "step_profiles.csv"),
               ["x", "initial", "kinetic", "heat"],
               [xs, step.rho().densities(),
                step_traj.states[-1].rho().densities(),
                step_heat.densities()])

    # entropy diagnostics need the mollified point mass
    smooth = mollify_state(dirac, cfg["mollify"])
    fir_traj = solve(smooth, SolverConfig(dt=dt, t_final=horizon))
    report = fir_check(fir_traj)
    report.write(os.path.join(out_dir, "fir_report.csv"),
                 os.path.join(out_dir, "fir_report.json"))

    script_path = os.path.join(out_dir, "plot_figure1.py")
    with open(script_path, "w") as fh:
        fh.write(_PLOT_SCRIPT)
    print(f"light cone and positivity hold at times {times}")
    print(f"mollified-run min slack={report.fir_slack!r}")
    print(f"profiles and plot script written to {out_dir}")
    return 0


# --------------------------------------------------------------------------
# parser wiring
# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="kacfc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="deterministic evolution")
    p_solve.add_argument("--V", dest="speed", type=float)
    p_solve.add_argument("--lambda", dest="switch_rate", type=float)
    p_solve.add_argument("--n", dest="n_cells", type=int)
    p_solve.add_argument("--T", dest="t_final", type=float)
    p_solve.add_argument("--dt", dest="dt", type=float)
    p_solve.add_argument("--scheme", dest="scheme",
                         choices=["strang_split", "spectral_oracle"])
    p_solve.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    p_solve.add_argument("--initial", dest="initial",
                         choices=["uniform", "bump", "dirac", "step"])
    p_solve.add_argument("--concentration", dest="concentration", type=float)
    p_solve.add_argument("--drift", dest="drift", type=float)
    p_solve.add_argument("--out", dest="out")
    p_solve.add_argument("--config", dest="config")
    p_solve.set_defaults(func=cmd_solve)

    p_part = sub.add_parser("particles", help="Monte Carlo ensemble")
    p_part.add_argument("--N", dest="n_particles", type=int)
    p_part.add_argument("--seed", dest="seed", type=int)
    p_part.add_argument("--V", dest="speed", type=float)
    p_part.add_argument("--lambda", dest="switch_rate", type=float)
    p_part.add_argument("--bins", dest="bin_cells", type=int)
    p_part.add_argument("--times", dest="times")
    p_part.add_argument("--initial", dest="initial",
                        choices=["uniform", "bump", "dirac", "step"])
    p_part.add_argument("--concentration", dest="concentration", type=float)
    p_part.add_argument("--drift", dest="drift", type=float)
    p_part.add_argument("--compare", dest="compare", action="store_const",
                        const=True)
    p_part.add_argument("--out", dest="out")
    p_part.add_argument("--config", dest="config")
    p_part.set_defaults(func=cmd_particles)

    p_fir = sub.add_parser("fir", help="entropy-dissipation report")
    p_fir.add_argument("--V", dest="speed", type=float)
    p_fir.add_argument("--lambda", dest="switch_rate", type=float)
    p_fir.add_argument("--n", dest="n_cells", type=int)
    p_fir.add_argument("--T", dest="t_final", type=float)
    p_fir.add_argument("--dt", dest="dt", type=float)
    p_fir.add_argument("--initial", dest="initial",
                       choices=["uniform", "bump", "dirac", "step"])
    p_fir.add_argument("--concentration", dest="concentration", type=float)
    p_fir.add_argument("--drift", dest="drift", type=float)
    p_fir.add_argument("--mollify", dest="mollify", type=float)
    p_fir.add_argument("--out", dest="out")
    p_fir.add_argument("--config", dest="config")
    p_fir.set_defaults(func=cmd_fir)

    p_lim = sub.add_parser("limits", help="scaling-limit sweeps")
    p_lim.add_argument("mode", nargs="?", choices=["diffusive", "hyperbolic"])
    p_lim.add_argument("--alpha", dest="alpha", type=float)
    p_lim.add_argument("--V", dest="speeds_or_speed")
    p_lim.add_argument("--lambda", dest="rates")
    p_lim.add_argument("--base-cells", dest="base_cells", type=int)
    p_lim.add_argument("--T", dest="t_final", type=float)
    p_lim.add_argument("--snapshots", dest="n_snapshots", type=int)
    p_lim.add_argument("--concentration", dest="concentration", type=float)
    p_lim.add_argument("--drift", dest="drift", type=float)
    p_lim.add_argument("--out", dest="out")
    p_lim.add_argument("--config", dest="config")
    p_lim.set_defaults(func=cmd_limits)

    p_fig = sub.add_parser("figure1", help="finite vs infinite propagation "
                                           "speed comparison")
    p_fig.add_argument("--V", dest="speed", type=float)
    p_fig.add_argument("--lambda", dest="switch_rate", type=float)
    p_fig.add_argument("--n", dest="n_cells", type=int)
    p_fig.add_argument("--times", dest="times")
    p_fig.add_argument("--mollify", dest="mollify", type=float)
    p_fig.add_argument("--out", dest="out")
    p_fig.add_argument("--config", dest="config")
    p_fig.set_defaults(func=cmd_figure1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "limits":
        # --V doubles as the speed list (diffusive) and the fixed speed
        # (hyperbolic); disambiguate after parsing
        raw = getattr(args, "speeds_or_speed", None)
        if raw is not None:
            vals = _float_list(raw)
            if args.mode == "hyperbolic":
                if len(vals) != 1:
                    parser.error("limits hyperbolic takes a single --V")
                args.speed = vals[0]
                args.speeds = None
            else:
                args.speeds = vals
                args.speed = None
        else:
            args.speeds = None
            args.speed = None
    try:
        return args.func(args, parser)
    except IllPreparedError as exc:
        _error_json(exc)
        print(f"ill-prepared data: {exc}", file=sys.stderr)
        return ILL_PREPARED_EXIT
    except PropertyFailure as exc:
        _error_json(exc)
        return PROPERTY_EXIT
    except Exception as exc:                     # noqa: BLE001
        _error_json(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
