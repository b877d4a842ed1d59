"""Measures on the unit torus and on the two-velocity phase space.

Everything is cell-based: a measure on the torus is a vector of cell masses
on the uniform grid with centers (i + 1/2) * dx, dx = 1 / n_cells. A kinetic
state carries one such vector per velocity channel (+V and -V). The
macroscopic pair (rho, omega) = (plus + minus, V * (plus - minus)) and the
kinetic state determine each other; the inverse is well defined exactly on
the cone |omega| <= V * rho.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConeViolationError, MassMismatchError

MASS_TOL = 1e-9
CONE_REL_TOL = 1e-10
MOLLIFY_IMAGES = 10      # wrapped-Gaussian images summed over |k| <= 10


@dataclass(frozen=True)
class TorusGrid:
    """Uniform cell grid on [0, 1) with periodic wrap."""

    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError(f"need at least 2 cells, got {self.n_cells}")

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx

    def index(self, x) -> np.ndarray:
        """Cell index of position(s) x, wrapped onto [0, 1)."""
        xi = np.asarray(x, dtype=float) % 1.0
        return np.minimum((xi * self.n_cells).astype(np.int64), self.n_cells - 1)


@dataclass(frozen=True)
class ModelParams:
    """Speed V > 0 and switching rate lambda >= 0 of the two-velocity model."""

    speed: float
    switch_rate: float

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError(f"speed must be positive, got {self.speed}")
        if self.switch_rate < 0:
            raise ValueError(f"switch rate must be >= 0, got {self.switch_rate}")

    @property
    def alpha(self) -> float:
        """Diffusivity V^2 / (2 lambda) of the parabolic limit."""
        if self.switch_rate == 0:
            return np.inf
        return self.speed ** 2 / (2.0 * self.switch_rate)

    @property
    def tau(self) -> float:
        """Relaxation time 1 / (2 lambda)."""
        if self.switch_rate == 0:
            return np.inf
        return 1.0 / (2.0 * self.switch_rate)


@dataclass
class GridMeasure:
    """Signed measure on the torus grid, stored as cell masses."""

    grid: TorusGrid
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.grid.n_cells,):
            raise ValueError(f"weights shape {w.shape} does not match grid "
                             f"n_cells={self.grid.n_cells}")
        self.weights = w

    def mass(self) -> float:
        return float(self.weights.sum())

    def densities(self) -> np.ndarray:
        return self.weights / self.grid.dx

    def copy(self) -> "GridMeasure":
        return GridMeasure(self.grid, self.weights.copy())


@dataclass
class KineticState:
    """Two velocity channels on a common grid, plus model parameters."""

    plus: GridMeasure
    minus: GridMeasure
    params: ModelParams

    def __post_init__(self):
        if self.plus.grid != self.minus.grid:
            raise ValueError("plus/minus channels live on different grids")

    @property
    def grid(self) -> TorusGrid:
        return self.plus.grid

    def mass(self) -> float:
        return self.plus.mass() + self.minus.mass()

    def rho(self) -> GridMeasure:
        return GridMeasure(self.grid, self.plus.weights + self.minus.weights)

    def omega(self) -> GridMeasure:
        v = self.params.speed
        return GridMeasure(self.grid, v * (self.plus.weights - self.minus.weights))

    def copy(self) -> "KineticState":
        return KineticState(self.plus.copy(), self.minus.copy(), self.params)


@dataclass
class DensityFluxPair:
    """Macroscopic pair (rho, omega) on a common grid."""

    rho: GridMeasure
    omega: GridMeasure

    def __post_init__(self):
        if self.rho.grid != self.omega.grid:
            raise ValueError("rho/omega live on different grids")

    @property
    def grid(self) -> TorusGrid:
        return self.rho.grid


@dataclass
class FluxPair:
    """Per-interval fluxes of a kinetic trajectory.

    j1 is the transport flux (one signed measure per velocity channel),
    j2 the jump flux (one nonnegative measure per channel). When attached to
    a finite-rate trajectory, j1(., v) = v * sigma_bar(., v) for the interval
    midpoint state sigma_bar.
    """

    grid: TorusGrid
    j1_plus: np.ndarray
    j1_minus: np.ndarray
    j2_plus: np.ndarray
    j2_minus: np.ndarray

    def __post_init__(self):
        n = self.grid.n_cells
        for name in ("j1_plus", "j1_minus", "j2_plus", "j2_minus"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)

    def midpoint_state(self, params: ModelParams) -> KineticState:
        """Recover the state the fluxes were recorded at, from j1 = v*sigma."""
        v = params.speed
        plus = GridMeasure(self.grid, self.j1_plus / v)
        minus = GridMeasure(self.grid, -self.j1_minus / v)
        return KineticState(plus, minus, params)


# --------------------------------------------------------------------------
# projection / lift between kinetic states and (rho, omega) pairs
# --------------------------------------------------------------------------

def project_pi(state: KineticState) -> DensityFluxPair:
    """(plus, minus) -> (rho, omega) = (plus + minus, V*(plus - minus))."""
    return DensityFluxPair(state.rho(), state.omega())


def lift_pi(pair: DensityFluxPair, params: ModelParams) -> KineticState:
    """Inverse of project_pi: sigma_pm = (rho +- omega/V) / 2.

    Raises ConeViolationError where |omega_i| > V*rho_i beyond the relative
    tolerance CONE_REL_TOL * V (a negative channel mass has no kinetic
    meaning). Round-off violations inside the tolerance are clipped to the
    cone boundary.
    """
    v = params.speed
    rho = pair.rho.weights
    omega = pair.omega.weights
    excess = np.abs(omega) - v * rho
    tol = CONE_REL_TOL * v * max(1.0, float(np.max(np.abs(rho)) if rho.size else 1.0))
    if np.any(excess > tol):
        i = int(np.argmax(excess))
        raise ConeViolationError(
            f"|omega|={abs(omega[i]):.6e} > V*rho={v * rho[i]:.6e} at cell {i}")
    omega_clip = np.clip(omega, -v * rho, v * rho)
    plus = 0.5 * (rho + omega_clip / v)
    minus = 0.5 * (rho - omega_clip / v)
    return KineticState(GridMeasure(pair.grid, plus),
                        GridMeasure(pair.grid, minus), params)


# --------------------------------------------------------------------------
# metrics and norms
# --------------------------------------------------------------------------

def tv_norm(measure: GridMeasure) -> float:
    """Total variation norm: sum of |cell mass|."""
    return float(np.sum(np.abs(measure.weights)))


def wasserstein1(mu: GridMeasure, nu: GridMeasure) -> float:
    """Exact W1 distance between nonnegative equal-mass measures on the circle.

    The transport cost equals dx * sum_i |c_i - s*| where c is the cumulative
    difference of cell masses and s* its median (the optimal constant mass
    shift through the cut at x = 0). This is the 1-D periodic optimal
    transport solved in closed form.
    """
    if mu.grid != nu.grid:
        raise ValueError("measures live on different grids")
    if np.any(mu.weights < -MASS_TOL) or np.any(nu.weights < -MASS_TOL):
        raise ValueError("wasserstein1 needs nonnegative measures")
    if abs(mu.mass() - nu.mass()) > MASS_TOL:
        raise MassMismatchError(
            f"total masses differ: {mu.mass():.12e} vs {nu.mass():.12e}")
    c = np.cumsum(mu.weights - nu.weights)
    return float(np.sum(np.abs(c - np.median(c))) * mu.grid.dx)


def kinetic_distance(a: KineticState, b: KineticState) -> float:
    """Channel-wise W1 sum; finite only when channel masses agree."""
    return wasserstein1(a.plus, b.plus) + wasserstein1(a.minus, b.minus)


# --------------------------------------------------------------------------
# mollification
# --------------------------------------------------------------------------

def heat_kernel_weights(grid: TorusGrid, eps: float) -> np.ndarray:
    """Wrapped-Gaussian kernel of variance eps sampled at cell lags.

    The image sum is truncated at |k| <= MOLLIFY_IMAGES and the discrete
    kernel renormalised to unit mass, so convolution preserves total mass
    exactly up to round-off.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    n = grid.n_cells
    lag = np.arange(n)
    dist = np.where(lag <= n // 2, lag * grid.dx, lag * grid.dx - 1.0)
    images = np.arange(-MOLLIFY_IMAGES, MOLLIFY_IMAGES + 1)
    kernel = np.exp(-((dist[:, None] - images[None, :]) ** 2) / (2.0 * eps)).sum(axis=1)
    return kernel / kernel.sum()


def mollify(measure: GridMeasure, eps: float) -> GridMeasure:
    """Circular convolution with the wrapped-Gaussian kernel of variance eps."""
    kernel = heat_kernel_weights(measure.grid, eps)
    smoothed = np.real(np.fft.ifft(np.fft.fft(measure.weights) * np.fft.fft(kernel)))
    return GridMeasure(measure.grid, smoothed)


def mollify_state(state: KineticState, eps: float) -> KineticState:
    return KineticState(mollify(state.plus, eps), mollify(state.minus, eps),
                        state.params)


# --------------------------------------------------------------------------
# standard initial states
# --------------------------------------------------------------------------

def make_uniform(grid: TorusGrid, params: ModelParams) -> KineticState:
    half = np.full(grid.n_cells, 0.5 / grid.n_cells)
    return KineticState(GridMeasure(grid, half.copy()),
                        GridMeasure(grid, half.copy()), params)


def make_bump(grid: TorusGrid, params: ModelParams, center: float = 0.5,
              concentration: float = 4.0, drift_fraction: float = 0.0
              ) -> KineticState:
    """Smooth strictly positive bump exp(kappa * cos(2 pi (x - center))).

    drift_fraction in [-1, 1] sets omega = drift_fraction * V * rho (so the
    cone condition holds by construction); 0 gives symmetric channels.
    """
    if not -1.0 <= drift_fraction <= 1.0:
        raise ConeViolationError(f"drift_fraction {drift_fraction} leaves the cone")
    x = grid.centers()
    rho = np.exp(concentration * np.cos(2 * np.pi * (x - center)))
    rho /= rho.sum()
    plus = 0.5 * (1.0 + drift_fraction) * rho
    minus = 0.5 * (1.0 - drift_fraction) * rho
    return KineticState(GridMeasure(grid, plus), GridMeasure(grid, minus), params)


def make_dirac(grid: TorusGrid, params: ModelParams, x0: float = 0.5
               ) -> KineticState:
    """All mass in the cell containing x0, split evenly between channels."""
    plus = np.zeros(grid.n_cells)
    minus = np.zeros(grid.n_cells)
    i = int(grid.index(x0))
    plus[i] = 0.5
    minus[i] = 0.5
    return KineticState(GridMeasure(grid, plus), GridMeasure(grid, minus), params)


def make_step(grid: TorusGrid, params: ModelParams, edge: float = 0.5
              ) -> KineticState:
    """Indicator of [0, edge), normalised to mass one, even channel split."""
    x = grid.centers()
    rho = np.where(x < edge, 1.0, 0.0)
    rho /= rho.sum()
    return KineticState(GridMeasure(grid, rho / 2), GridMeasure(grid, rho / 2),
                        params)


INITIAL_STATES = {
    "uniform": make_uniform,
    "bump": make_bump,
    "dirac": make_dirac,
    "step": make_step,
}


def is_atomlike(state: KineticState, frac: float = 1.0 - 1e-12) -> bool:
    """True when >= frac of the mass sits in one spatial cell.

    Grid states always have finite entropy against the uniform reference, so
    this is the grid-level stand-in for 'not absolutely continuous': an atom
    placed in a single cell stays an atom no matter how fine the grid.
    """
    rho = state.plus.weights + state.minus.weights
    total = rho.sum()
    return bool(total > 0 and np.max(rho) >= frac * total)


# --------------------------------------------------------------------------
# serialisation
# --------------------------------------------------------------------------

def save_measure_csv(measure: GridMeasure, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "mass"])
        for x, w in zip(measure.grid.centers(), measure.weights):
            writer.writerow([repr(float(x)), repr(float(w))])


def load_measure_csv(path) -> GridMeasure:
    xs, ws = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["x", "mass"]:
            raise ValueError(f"unexpected header {header!r}")
        for row in reader:
            xs.append(float(row[0]))
            ws.append(float(row[1]))
    grid = TorusGrid(len(ws))
    if not np.allclose(xs, grid.centers(), atol=1e-12):
        raise ValueError("x column does not match cell centers of a uniform grid")
    return GridMeasure(grid, np.array(ws))


def save_measure_binary(measure: GridMeasure, path) -> None:
    """Little-endian u64 cell count followed by the f64 mass array."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", measure.grid.n_cells))
        fh.write(measure.weights.astype("<f8").tobytes())


def load_measure_binary(path) -> GridMeasure:
    with open(path, "rb") as fh:
        raw = fh.read()
    (n,) = struct.unpack_from("<Q", raw, 0)
    w = np.frombuffer(raw, dtype="<f8", count=n, offset=8)
    return GridMeasure(TorusGrid(int(n)), w.copy())


def save_state(state: KineticState, path) -> None:
    """JSON header (u64 byte length prefix) then plus/minus f64 arrays."""
    header = json.dumps({
        "n_cells": state.grid.n_cells,
        "speed": state.params.speed,
        "switch_rate": state.params.switch_rate,
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(state.plus.weights.astype("<f8").tobytes())
        fh.write(state.minus.weights.astype("<f8").tobytes())


def load_state(path) -> KineticState:
    with open(path, "rb") as fh:
        raw = fh.read()
    (hlen,) = struct.unpack_from("<Q", raw, 0)
    meta = json.loads(raw[8:8 + hlen].decode())
    n = int(meta["n_cells"])
    grid = TorusGrid(n)
    params = ModelParams(float(meta["speed"]), float(meta["switch_rate"]))
    off = 8 + hlen
    plus = np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy()
    minus = np.frombuffer(raw, dtype="<f8", count=n, offset=off + 8 * n).copy()
    return KineticState(GridMeasure(grid, plus), GridMeasure(grid, minus), params)
