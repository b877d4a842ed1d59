"""Deterministic evolution of the two-speed kinetic system.

Two schemes:

- strang_split: half collision step, exact transport shift, half collision
  step. The CFL ratio V dt / dx must be a positive integer, so transport is
  an exact cell roll and the only error is the operator splitting, O(dt^2)
  per unit time. Collision half-steps damp the channel difference by the
  exact factor e^{-lambda dt}, so mass is conserved to round-off and states
  stay nonnegative.
- spectral_oracle: per-Fourier-mode closed-form matrix exponential of the
  macroscopic pair (rho_k, omega_k). Exact in time for band-limited data,
  any dt > 0.

Both record per-interval fluxes built from the trapezoid-in-time average of
the interval's states: j1 = v sigma_bar, j2 = lambda sigma_bar. With these
midpoint fluxes the jump entropy of each interval is O(dt^2) and the total
jump TV mass is exactly lambda * T * mass.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CflViolationError
from .functionals import entropy_vs_uniform, fisher_info
from .measures import (DensityFluxPair, FluxPair, GridMeasure, KineticState,
                       ModelParams, TorusGrid)

DEGENERATE_DISC_TOL = 1e-8    # |lambda^2 - (2 pi k V)^2| below this: Jordan form

_SCHEMES = ("strang_split", "spectral_oracle")


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping request.

    dt is a request: strang_split rounds it down to the nearest s * dx / V
    with integer s >= 1 (CflViolationError if even s = 1 overshoots the
    request by more than a round-off margin). spectral_oracle keeps dt as
    given. t_final is rounded to a whole number of steps. snapshot_every
    thins storage: states every m-th step, fluxes time-averaged over each
    snapshot interval (the average is the trapezoid of the micro-midpoints,
    so flux linear functionals of the fine path are preserved exactly).
    """

    dt: float
    t_final: float
    scheme: str = "strang_split"
    snapshot_every: int = 1

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; "
                             f"expected one of {_SCHEMES}")
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be a positive integer")


def admissible_dt(grid: TorusGrid, params: ModelParams, dt_request: float
                  ) -> tuple[float, int]:
    """Largest dt <= request (within round-off) with V dt / dx integer."""
    ratio = params.speed * dt_request / grid.dx
    shift = int(math.floor(ratio * (1.0 + 1e-12)))
    if shift < 1:
        raise CflViolationError(
            f"dt={dt_request:.3e} is below one transport cell: need "
            f"dt >= dx/V = {grid.dx / params.speed:.3e}")
    return shift * grid.dx / params.speed, shift


@dataclass
class Trajectory:
    """Snapshot states, per-interval average fluxes, and the time grid."""

    grid: TorusGrid
    params: ModelParams
    scheme: str
    dt: float                    # micro time step actually used
    times: np.ndarray            # snapshot times, length K+1
    states: list                 # KineticState per snapshot
    fluxes: list                 # FluxPair per snapshot interval, length K
    snapshot_every: int = 1

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        meta = {
            "scheme": self.scheme,
            "dt": self.dt,
            "snapshot_every": self.snapshot_every,
            "n_cells": self.grid.n_cells,
            "speed": self.params.speed,
            "switch_rate": self.params.switch_rate,
            "n_snapshots": len(self.states),
            "times": [repr(float(t)) for t in self.times],
        }
        with open(os.path.join(out_dir, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        from .measures import save_state
        for i, state in enumerate(self.states):
            save_state(state, os.path.join(out_dir, f"state_{i:06d}.bin"))
        for i, flux in enumerate(self.fluxes):
            _save_flux(os.path.join(out_dir, f"flux_{i:06d}.bin"), flux)
        with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
            fh.write("t,mass,entropy,fi\n")
            for t, state in zip(self.times, self.states):
                fh.write(f"{float(t)!r},{state.mass()!r},"
                         f"{entropy_vs_uniform(state)!r},"
                         f"{fisher_info(state)!r}\n")

    @staticmethod
    def load(out_dir: str) -> "Trajectory":
        from .measures import load_state
        with open(os.path.join(out_dir, "meta.json")) as fh:
            meta = json.load(fh)
        states = [load_state(os.path.join(out_dir, f"state_{i:06d}.bin"))
                  for i in range(meta["n_snapshots"])]
        grid = states[0].grid
        fluxes = [_load_flux(os.path.join(out_dir, f"flux_{i:06d}.bin"), grid)
                  for i in range(meta["n_snapshots"] - 1)]
        times = np.array([float(t) for t in meta["times"]])
        return Trajectory(grid=grid, params=states[0].params,
                          scheme=meta["scheme"], dt=meta["dt"], times=times,
                          states=states, fluxes=fluxes,
                          snapshot_every=meta["snapshot_every"])


def _save_flux(path: str, flux: FluxPair) -> None:
    arrays = (flux.j1_plus, flux.j1_minus, flux.j2_plus, flux.j2_minus)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(flux.j1_plus)))
        for arr in arrays:
            fh.write(np.asarray(arr, dtype="<f8").tobytes())


def _load_flux(path: str, grid: TorusGrid) -> FluxPair:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        arrays = [np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
                  for _ in range(4)]
    if n != grid.n_cells:
        raise ValueError(f"flux file holds {n} cells, grid has {grid.n_cells}")
    return FluxPair(grid, *arrays)


# --------------------------------------------------------------------------
# single steps
# --------------------------------------------------------------------------

def _strang_arrays(p: np.ndarray, m: np.ndarray, shift: int, decay: float
                   ) -> tuple[np.ndarray, np.ndarray]:
    """One split step on raw mass arrays; decay = e^{-lambda dt}."""
    mean = 0.5 * (p + m)
    half = 0.5 * (p - m) * decay
    p, m = mean + half, mean - half
    p = np.roll(p, shift)
    m = np.roll(m, -shift)
    mean = 0.5 * (p + m)
    half = 0.5 * (p - m) * decay
    return mean + half, mean - half


def _midpoint_flux(grid: TorusGrid, params: ModelParams, p_mid: np.ndarray,
                   m_mid: np.ndarray) -> FluxPair:
    v = params.speed
    lam = params.switch_rate
    return FluxPair(grid, v * p_mid, -v * m_mid, lam * p_mid, lam * m_mid)


def step_strang(state: KineticState, dt: float) -> tuple[KineticState, FluxPair]:
    """One Strang step; V dt / dx must be integer (CflViolationError else)."""
    grid = state.grid
    params = state.params
    ratio = params.speed * dt / grid.dx
    shift = int(round(ratio))
    if shift < 1 or abs(ratio - shift) > 1e-9 * max(1.0, shift):
        raise CflViolationError(
            f"V dt / dx = {ratio!r} is not a positive integer")
    decay = math.exp(-params.switch_rate * dt)
    p, m = _strang_arrays(state.plus.weights, state.minus.weights, shift, decay)
    nxt = KineticState(GridMeasure(grid, p), GridMeasure(grid, m), params)
    p_mid = 0.5 * (state.plus.weights + p)
    m_mid = 0.5 * (state.minus.weights + m)
    return nxt, _midpoint_flux(grid, params, p_mid, m_mid)


def mode_propagator(n_cells: int, params: ModelParams, dt: float
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form e^{dt A_k} entries for the (rho_k, omega_k) pair.

    A_k = [[0, -i k'], [-i k' V^2, -2 lambda]] with k' = 2 pi k. With
    s = sqrt(lambda^2 - (k' V)^2),
        e^{dt A_k} = e^{-lambda dt} [cosh(s dt) I + sinh(s dt)/s (A_k +
        lambda I)],
    and the sinh(s dt)/s factor degenerates to dt when |lambda^2 - (k'V)^2|
    <= DEGENERATE_DISC_TOL (the Jordan-block resonance).
    """
    lam = params.switch_rate
    v = params.speed
    k = np.fft.fftfreq(n_cells, d=1.0 / n_cells)
    kp = 2.0 * np.pi * k
    disc = lam ** 2 - (kp * v) ** 2
    s = np.sqrt(disc.astype(complex))
    sdt = s * dt
    degenerate = np.abs(disc) <= DEGENERATE_DISC_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        sinc = np.where(degenerate, dt, np.sinh(sdt) / np.where(s == 0, 1.0, s))
    cosh = np.where(degenerate, 1.0, np.cosh(sdt))
    damp = math.exp(-lam * dt)
    e11 = damp * (cosh + sinc * lam)
    e12 = damp * (sinc * (-1j * kp))
    e21 = damp * (sinc * (-1j * kp * v ** 2))
    e22 = damp * (cosh - sinc * lam)
    return e11, e12, e21, e22


def step_spectral(state: KineticState, dt: float) -> tuple[KineticState, FluxPair]:
    """One exact-in-time spectral step (any dt > 0)."""
    grid = state.grid
    params = state.params
    e11, e12, e21, e22 = mode_propagator(grid.n_cells, params, dt)
    rho_hat = np.fft.fft(state.rho().weights)
    om_hat = np.fft.fft(state.omega().weights)
    rho_new = np.real(np.fft.ifft(e11 * rho_hat + e12 * om_hat))
    om_new = np.real(np.fft.ifft(e21 * rho_hat + e22 * om_hat))
    v = params.speed
    p = 0.5 * (rho_new + om_new / v)
    m = 0.5 * (rho_new - om_new / v)
    nxt = KineticState(GridMeasure(grid, p), GridMeasure(grid, m), params)
    p_mid = 0.5 * (state.plus.weights + p)
    m_mid = 0.5 * (state.minus.weights + m)
    return nxt, _midpoint_flux(grid, params, p_mid, m_mid)


# --------------------------------------------------------------------------
# full runs
# --------------------------------------------------------------------------

def solve(initial: KineticState, config: SolverConfig) -> Trajectory:
    """Evolve the initial state to t_final, recording thinned snapshots.

    The per-snapshot-interval flux is the trapezoid average of the micro
    midpoint fluxes, so any functional linear in the flux evaluates on the
    thinned trajectory exactly as on the fine one.
    """
    grid = initial.grid
    params = initial.params
    if config.scheme == "strang_split":
        dt, shift = admissible_dt(grid, params, config.dt)
    else:
        dt, shift = config.dt, 0
    n_steps = max(1, int(round(config.t_final / dt)))
    every = min(config.snapshot_every, n_steps)

    decay = math.exp(-params.switch_rate * dt)
    if config.scheme == "spectral_oracle":
        prop = mode_propagator(grid.n_cells, params, dt)

    p = initial.plus.weights.copy()
    m = initial.minus.weights.copy()
    states = [KineticState(GridMeasure(grid, p.copy()),
                           GridMeasure(grid, m.copy()), params)]
    fluxes = []
    times = [0.0]
    acc_p = np.zeros(grid.n_cells)
    acc_m = np.zeros(grid.n_cells)
    in_window = 0
    v = params.speed
    for step in range(1, n_steps + 1):
        if config.scheme == "strang_split":
            p_new, m_new = _strang_arrays(p, m, shift, decay)
        else:
            rho_hat = np.fft.fft(p + m)
            om_hat = np.fft.fft(v * (p - m))
            rho_new = np.real(np.fft.ifft(prop[0] * rho_hat + prop[1] * om_hat))
            om_new = np.real(np.fft.ifft(prop[2] * rho_hat + prop[3] * om_hat))
            p_new = 0.5 * (rho_new + om_new / v)
            m_new = 0.5 * (rho_new - om_new / v)
        acc_p += 0.5 * (p + p_new)
        acc_m += 0.5 * (m + m_new)
        in_window += 1
        p, m = p_new, m_new
        if step % every == 0 or step == n_steps:
            states.append(KineticState(GridMeasure(grid, p.copy()),
                                       GridMeasure(grid, m.copy()), params))
            fluxes.append(_midpoint_flux(grid, params, acc_p / in_window,
                                         acc_m / in_window))
            times.append(step * dt)
            acc_p = np.zeros(grid.n_cells)
            acc_m = np.zeros(grid.n_cells)
            in_window = 0
    return Trajectory(grid=grid, params=params, scheme=config.scheme, dt=dt,
                      times=np.array(times), states=states, fluxes=fluxes,
                      snapshot_every=every)


def heat_reference(rho0: GridMeasure, alpha: float, times) -> list[GridMeasure]:
    """Spectral heat flow at diffusivity alpha: rho_hat_k(t) = rho_hat_k(0)
    e^{-alpha (2 pi k)^2 t}."""
    n = rho0.grid.n_cells
    k = np.fft.fftfreq(n, d=1.0 / n)
    rho_hat = np.fft.fft(rho0.weights)
    out = []
    for t in np.asarray(times, dtype=float):
        decayed = rho_hat * np.exp(-alpha * (2.0 * np.pi * k) ** 2 * t)
        out.append(GridMeasure(rho0.grid, np.real(np.fft.ifft(decayed))))
    return out


def wave_reference(pair0: DensityFluxPair, speed: float, times
                   ) -> list[DensityFluxPair]:
    """Free streaming of the half-sum invariants at speeds +-V.

    At lattice times (V t / dx integer within 1e-9) the translation is an
    exact cell roll; otherwise the two neighbouring rolls are blended
    linearly.
    """
    grid = pair0.rho.grid
    dx = grid.dx
    sp = 0.5 * (pair0.rho.weights + pair0.omega.weights / speed)
    sm = 0.5 * (pair0.rho.weights - pair0.omega.weights / speed)

    def translate(arr: np.ndarray, cells: float) -> np.ndarray:
        base = math.floor(cells)
        frac = cells - base
        if frac < 1e-9:
            return np.roll(arr, base)
        if frac > 1 - 1e-9:
            return np.roll(arr, base + 1)
        return (1.0 - frac) * np.roll(arr, base) + frac * np.roll(arr, base + 1)

    out = []
    for t in np.asarray(times, dtype=float):
        cells = speed * t / dx
        sp_t = translate(sp, cells)
        sm_t = translate(sm, -cells)
        out.append(DensityFluxPair(GridMeasure(grid, sp_t + sm_t),
                                   GridMeasure(grid, speed * (sp_t - sm_t))))
    return out
