"""Scaling-limit sweeps and compactness diagnostics.

Diffusive regime: speed V up, jump rate V^2/(2 alpha), fixed alpha. Grids
refine with the speed (dx proportional to 1/V^2, dt = dx/V) so the splitting
error stays far below the model error, and every run is compared against the
same spectral heat flow. Hyperbolic regime: fixed speed, jump rate down to
zero, fixed grid, compared against exact free streaming.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .functionals import (MomentumTrajectory, limit_functional_hyperbolic,
                          projected_fir_terms, rate_functional,
                          test_function_bank)
from .measures import (DensityFluxPair, GridMeasure, KineticState, lift_pi,
                       ModelParams, TorusGrid, make_bump, wasserstein1)
from .solver import SolverConfig, Trajectory, heat_reference, solve, \
    wave_reference

_MODES = ("diffusive", "hyperbolic")


@dataclass(frozen=True)
class SweepSpec:
    """One family of runs against the matching macroscopic reference.

    mode "diffusive": values are speeds V; each runs at rate V^2/(2 alpha)
    on base_cells * (V / min V)^2 cells with dt = dx / V.
    mode "hyperbolic": values are jump rates; each runs at the fixed speed
    on base_cells cells with dt = dx / speed.
    """

    mode: str
    values: tuple
    alpha: float = 4.0
    speed: float = 2.0
    base_cells: int = 64
    t_final: float = 0.4
    n_snapshots: int = 80
    concentration: float = 0.05
    drift_fraction: float = 0.0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown sweep mode {self.mode!r}")
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise ValueError("a sweep needs at least two parameter values")
        if any(v <= 0 for v in vals) and self.mode == "diffusive":
            raise ValueError("speeds must be positive")
        if any(v < 0 for v in vals):
            raise ValueError("rates must be nonnegative")
        object.__setattr__(self, "values", vals)


@dataclass
class ConvergenceRecord:
    """Per-parameter errors against the reference plus diagnostics.

    trajectories and references stay in memory for follow-up diagnostics;
    write() emits sweep.csv (one row per parameter) and fit.json.
    """

    mode: str
    parameter_name: str
    parameters: np.ndarray
    errors: np.ndarray
    slope: float
    rows: list
    trajectories: list = field(default_factory=list, repr=False)
    references: list = field(default_factory=list, repr=False)

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(self.rows[0].keys()))
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: (repr(v) if isinstance(v, float) else v)
                                 for k, v in row.items()})
        fit = {
            "mode": self.mode,
            "parameter_name": self.parameter_name,
            "parameters": list(self.parameters),
            "sup_w1": list(self.errors),
            "log_log_slope": self.slope,
            "error_ratios": [self.errors[i + 1] / self.errors[i]
                             for i in range(len(self.errors) - 1)],
        }
        with open(os.path.join(out_dir, "fit.json"), "w") as fh:
            json.dump(fit, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0):
        return float("nan")
    lx = np.log(np.asarray(x, dtype=float))
    return float(np.polyfit(lx, np.log(y), 1)[0])


def _snapshot_stride(t_final: float, dt: float, n_snapshots: int) -> int:
    return max(1, int(round(t_final / dt / n_snapshots)))


def _well_prepared_state(grid: TorusGrid, params: ModelParams, alpha: float,
                         concentration: float) -> KineticState:
    """Bump density with omega = -alpha D rho, lifted through the cone check.

    Well-prepared data kills the initial layer; the lift raises
    ConeViolationError when alpha * |D log rho| exceeds the speed, i.e. when
    the bump is too concentrated for the slowest run of the sweep.
    """
    x = grid.centers()
    rho = np.exp(concentration * np.cos(2 * np.pi * x))
    rho /= rho.sum()
    omega = -alpha * (np.roll(rho, -1) - np.roll(rho, 1)) / (2.0 * grid.dx)
    pair = DensityFluxPair(GridMeasure(grid, rho), GridMeasure(grid, omega))
    return lift_pi(pair, params)


def run_diffusive_sweep(spec: SweepSpec) -> ConvergenceRecord:
    """Speed-up runs against the heat flow at diffusivity alpha.

    Every run starts from the same continuum datum, a gentle bump with the
    well-prepared flux omega = -alpha D rho, sampled on its own grid. Error
    per run: sup over snapshot times of W1(rho_t, heat rho_t). Row
    diagnostics: rescaled rate value, TV mass of the centered jump flux
    (omega_bar / 2 alpha), and the fitted space-time TV constant of omega.
    """
    if spec.mode != "diffusive":
        raise ValueError("spec.mode must be 'diffusive'")
    v_min = min(spec.values)
    rows, errors, trajs, refs = [], [], [], []
    for v in spec.values:
        lam = v ** 2 / (2.0 * spec.alpha)
        n = int(round(spec.base_cells * (v / v_min) ** 2))
        grid = TorusGrid(n)
        params = ModelParams(speed=v, switch_rate=lam)
        init = _well_prepared_state(grid, params, spec.alpha,
                                    spec.concentration)
        dt = grid.dx / v
        stride = _snapshot_stride(spec.t_final, dt, spec.n_snapshots)
        traj = solve(init, SolverConfig(dt=dt, t_final=spec.t_final,
                                        snapshot_every=stride))
        heat = heat_reference(init.rho(), spec.alpha, traj.times)
        errs = [wasserstein1(s.rho(), h) for s, h in zip(traj.states, heat)]
        sup_err = float(np.max(errs))
        jump_tv = sum((traj.times[k + 1] - traj.times[k]) * float(np.sum(np.abs(
            (traj.fluxes[k].j2_plus - traj.fluxes[k].j2_minus) / v)))
            for k in range(len(traj.fluxes)))
        fir = projected_fir_terms([s.rho() for s in traj.states],
                                  [s.omega() for s in traj.states],
                                  traj.times)
        rows.append({
            "speed": v, "switch_rate": lam, "n_cells": n, "dt": traj.dt,
            "sup_w1": sup_err, "rate_value": rate_functional(traj),
            "centered_jump_tv": jump_tv, "omega_tv_constant": fir.tv_constant,
        })
        errors.append(sup_err)
        trajs.append(traj)
        refs.append(heat)
    errors = np.array(errors)
    slope = _loglog_slope(spec.values, errors)
    return ConvergenceRecord(mode="diffusive", parameter_name="speed",
                             parameters=np.array(spec.values), errors=errors,
                             slope=slope, rows=rows, trajectories=trajs,
                             references=refs)


def run_hyperbolic_sweep(spec: SweepSpec) -> ConvergenceRecord:
    """Rate-down runs against exact free streaming at the fixed speed.

    Row diagnostics: total TV mass of j2 (identically lambda * T * mass for
    the recorded midpoint fluxes) and the vanishing-rate limit functional of
    the projected trajectory (+inf unless the jump flux is negligible).
    """
    if spec.mode != "hyperbolic":
        raise ValueError("spec.mode must be 'hyperbolic'")
    grid = TorusGrid(spec.base_cells)
    rows, errors, trajs, refs = [], [], [], []
    for lam in spec.values:
        params = ModelParams(speed=spec.speed, switch_rate=lam)
        init = make_bump(grid, params, concentration=spec.concentration,
                         drift_fraction=spec.drift_fraction)
        dt = grid.dx / spec.speed
        stride = _snapshot_stride(spec.t_final, dt, spec.n_snapshots)
        traj = solve(init, SolverConfig(dt=dt, t_final=spec.t_final,
                                        snapshot_every=stride))
        wave = wave_reference(DensityFluxPair(init.rho(), init.omega()),
                              spec.speed, traj.times)
        errs = [wasserstein1(s.rho(), w.rho)
                for s, w in zip(traj.states, wave)]
        sup_err = float(np.max(errs))
        j2_tv = sum((traj.times[k + 1] - traj.times[k]) * float(np.sum(
            traj.fluxes[k].j2_plus + traj.fluxes[k].j2_minus))
            for k in range(len(traj.fluxes)))
        mt = MomentumTrajectory.from_kinetic(traj)
        rows.append({
            "switch_rate": lam, "speed": spec.speed,
            "n_cells": spec.base_cells, "dt": traj.dt, "sup_w1": sup_err,
            "rate_value": rate_functional(traj), "j2_tv": j2_tv,
            "limit_value": limit_functional_hyperbolic(mt, spec.speed),
        })
        errors.append(sup_err)
        trajs.append(traj)
        refs.append(wave)
    errors = np.array(errors)
    positive = np.array(spec.values) > 0
    if positive.sum() >= 2:
        slope = _loglog_slope(np.array(spec.values)[positive],
                              errors[positive])
    else:
        slope = math.nan
    return ConvergenceRecord(mode="hyperbolic", parameter_name="switch_rate",
                             parameters=np.array(spec.values), errors=errors,
                             slope=slope, rows=rows, trajectories=trajs,
                             references=refs)


def equicontinuity_diagnostic(traj: Trajectory, h_values) -> dict:
    """Time-modulus table sup_t W1(rho_{t+h}, rho_t) for h in h_values.

    Each h is rounded to the nearest positive multiple of the snapshot
    spacing. Returns the actual lags, the sup-moduli, the fitted log-log
    exponent, and the square-root-normalised constants W1 / sqrt(h).
    """
    times = np.asarray(traj.times, dtype=float)
    if len(times) < 3:
        raise ValueError("trajectory too short for a time modulus")
    # the final snapshot may close a partial stride; keep the uniform prefix
    delta = float(times[1] - times[0])
    n_uniform = len(times)
    if times[-1] - times[-2] < 0.99 * delta:
        n_uniform -= 1
    rhos = [s.rho() for s in traj.states[:n_uniform]]
    lags, moduli = [], []
    for h in h_values:
        k = max(1, int(round(h / delta)))
        if k >= n_uniform:
            raise ValueError(f"lag h={h} exceeds the trajectory horizon")
        actual = k * delta
        w = max(wasserstein1(rhos[i + k], rhos[i])
                for i in range(n_uniform - k))
        lags.append(actual)
        moduli.append(w)
    lags = np.array(lags)
    moduli = np.array(moduli)
    exponent = _loglog_slope(lags, moduli)
    constants = moduli / np.sqrt(lags)
    return {"lags": lags, "moduli": moduli, "exponent": exponent,
            "sqrt_constants": constants,
            "sqrt_constant": float(np.max(constants))}


def _centered_d(masses: np.ndarray, dx: float) -> np.ndarray:
    """Centered-difference spatial derivative, measure in, measure out."""
    return (np.roll(masses, -1) - np.roll(masses, 1)) / (2.0 * dx)


def liminf_pairing(record: ConvergenceRecord, alpha: float) -> dict:
    """Duality pairings behind the liminf inequality, per sweep parameter.

    Diffusive mode, per trajectory and bank function psi:

        P(psi) = sum_k dt [ <psi, J_k - omega_bar_k / (2 alpha)>
                            - <psi^2, rho_bar_k> / (4 alpha) ]

    with J_k the centered jump flux (j2+ - j2-) / V of the recorded interval
    and (rho_bar, omega_bar) the flux-implied interval averages. The same
    pairing is evaluated at the limit reference (finest run's heat snapshots
    with J = -D rho / 2 and omega = -alpha D rho, centered differences), and
    the supremum of the limit pairing over psi is a lower bound for the
    limit functional, hence for the liminf of the recorded rate values.

    Hyperbolic mode: P(psi) = sum_k dt <psi, J_k> with J the first moment
    V (j2+ - j2-); the limit reference has J = 0 and pairing 0.

    Returns {"rows": per-(parameter, psi) dicts, "limit_rows": per-psi dicts
    at the reference}.
    """
    diffusive = record.mode == "diffusive"
    rows = []
    for traj, row in zip(record.trajectories, record.rows):
        times = np.asarray(traj.times, dtype=float)
        v = traj.params.speed
        rho_mid, omega_mid, jumps = [], [], []
        for k in range(len(times) - 1):
            f = traj.fluxes[k]
            mid = f.midpoint_state(traj.params)
            rho_mid.append(mid.rho().weights)
            omega_mid.append(mid.omega().weights)
            if diffusive:
                jumps.append((f.j2_plus - f.j2_minus) / v)
            else:
                jumps.append(v * (f.j2_plus - f.j2_minus))
        bank = test_function_bank(traj.grid, alpha=alpha,
                                  rho_bar=GridMeasure(traj.grid, rho_mid[-1]))
        for psi in bank:
            pairing = 0.0
            for k in range(len(times) - 1):
                dt = times[k + 1] - times[k]
                if diffusive:
                    u = jumps[k] - omega_mid[k] / (2.0 * alpha)
                    pairing += dt * (float(np.sum(psi.values * u))
                                     - float(np.sum(psi.values ** 2
                                                    * rho_mid[k]))
                                     / (4.0 * alpha))
                else:
                    pairing += dt * float(np.sum(psi.values * jumps[k]))
            rows.append({
                "parameter": row["speed"] if diffusive else row["switch_rate"],
                "psi": psi.name, "pairing": pairing,
                "rate_value": row["rate_value"],
            })

    limit_rows = []
    fine = record.trajectories[-1]
    grid = fine.grid
    dx = grid.dx
    times = np.asarray(fine.times, dtype=float)
    ref = record.references[-1]
    bank = test_function_bank(grid, alpha=alpha,
                              rho_bar=ref[-1] if diffusive
                              else ref[-1].rho)
    for psi in bank:
        pairing = 0.0
        for k in range(len(times) - 1):
            dt = times[k + 1] - times[k]
            if diffusive:
                m = 0.5 * (ref[k].weights + ref[k + 1].weights)
                d_rho = _centered_d(m, dx)
                u = -0.5 * d_rho - (-alpha * d_rho) / (2.0 * alpha)
                pairing += dt * (float(np.sum(psi.values * u))
                                 - float(np.sum(psi.values ** 2 * m))
                                 / (4.0 * alpha))
            # hyperbolic reference: J = 0, pairing stays 0
        limit_rows.append({"psi": psi.name, "pairing": pairing})
    return {"rows": rows, "limit_rows": limit_rows}
