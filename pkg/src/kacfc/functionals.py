"""Entropy, Fisher information, and the variational functionals.

Conventions, used throughout:

- Relative entropy of (possibly unnormalised) measures with nu-density f:
  Ent(mu|nu) = integral(f log f - f + 1) d nu, = +inf unless mu << nu.
  Per cell in mass units this is m log(m/q) - m + q with 0 log 0 = 0.
- The uniform kinetic reference splits mass dx/2 per cell and channel.
- Fisher information against the uniform reference reduces, in mass units,
  to FI(sigma) = sum_i (sqrt(m+_i) - sqrt(m-_i))^2; it vanishes exactly when
  the channels agree cell-wise.
- Time integrals of snapshot quantities use the trapezoid rule; the rate
  functional is the trapezoid of per-interval jump entropies against the
  endpoint states.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConeViolationError, ContinuityViolationError,
                     DegenerateStateError, IllPreparedError)
from .measures import (DensityFluxPair, GridMeasure, KineticState, ModelParams,
                       TorusGrid, is_atomlike, lift_pi, mollify, tv_norm)

FLUX_CONSTRAINT_RTOL = 1e-10
RESIDUAL_TOL = 1e-8
POSITIVITY_FLOOR = 1e-8     # floor inside log for adaptive test functions


def _checked_masses(w: np.ndarray, what: str) -> np.ndarray:
    """Clip round-off negatives to zero; reject genuinely negative mass."""
    w = np.asarray(w, dtype=float)
    if np.any(w < -1e-12):
        raise ValueError(f"{what} has negative mass {w.min():.3e}")
    return np.maximum(w, 0.0)


def rel_entropy_masses(mu: np.ndarray, nu: np.ndarray) -> float:
    """Ent(mu|nu) = sum m log(m/q) - m + q over cells, +inf off support."""
    m = _checked_masses(mu, "mu")
    q = _checked_masses(nu, "nu")
    if np.any((q == 0.0) & (m > 0.0)):
        return math.inf
    pos = m > 0.0
    out = float(np.sum(q) - np.sum(m))
    out += float(np.sum(m[pos] * np.log(m[pos] / q[pos])))
    return out


def rel_entropy(mu: GridMeasure, nu: GridMeasure) -> float:
    if mu.grid != nu.grid:
        raise ValueError("measures live on different grids")
    return rel_entropy_masses(mu.weights, nu.weights)


def kinetic_rel_entropy(mu_plus, mu_minus, nu_plus, nu_minus) -> float:
    """Channel-summed relative entropy of kinetic (two-channel) measures."""
    a = rel_entropy_masses(mu_plus, nu_plus)
    if math.isinf(a):
        return math.inf
    b = rel_entropy_masses(mu_minus, nu_minus)
    return a + b


def uniform_reference_masses(grid: TorusGrid) -> np.ndarray:
    """Cell masses of the uniform kinetic reference, per channel."""
    return np.full(grid.n_cells, 0.5 * grid.dx)


def entropy_vs_uniform(state: KineticState) -> float:
    """Ent(sigma | uniform-in-x, fair-coin-in-v reference)."""
    q = uniform_reference_masses(state.grid)
    return kinetic_rel_entropy(state.plus.weights, state.minus.weights, q, q)


def rho_entropy_vs_lebesgue(rho: GridMeasure) -> float:
    """Ent(rho | Lebesgue) in mass units: sum m log(m n) - m + 1/n."""
    q = np.full(rho.grid.n_cells, rho.grid.dx)
    return rel_entropy_masses(rho.weights, q)


def fisher_info(state: KineticState) -> float:
    """Velocity-swap Fisher information against the uniform reference.

    In mass units FI = sum_i (sqrt(m+_i) - sqrt(m-_i))^2. Zero exactly when
    the two channels agree cell by cell on the grid (grid-level statement of
    the velocity-uniformity criterion).
    """
    p = _checked_masses(state.plus.weights, "plus channel")
    m = _checked_masses(state.minus.weights, "minus channel")
    return float(np.sum((np.sqrt(p) - np.sqrt(m)) ** 2))


def generalized_fi(state: KineticState, refstate: KineticState) -> float:
    """Generalised Fisher information against a kinetic reference state.

    Literal integrand, per cell and channel in mass units:
        (r o iota) zeta - eta - 1/2 [ sqrt((r o iota) * r) zeta - eta ]
    with r = d eta / d zeta. The velocity swap `o iota` exchanges channels.
    Against the uniform reference this equals fisher_info / 2. For
    velocity-asymmetric references the sum is not sign-definite; it is a
    reported diagnostic, not a certified lower bound.
    """
    if state.grid != refstate.grid:
        raise ValueError("state and reference live on different grids")
    ep = _checked_masses(state.plus.weights, "state plus")
    em = _checked_masses(state.minus.weights, "state minus")
    zp = _checked_masses(refstate.plus.weights, "reference plus")
    zm = _checked_masses(refstate.minus.weights, "reference minus")
    if np.any((zp == 0) & (ep > 0)) or np.any((zm == 0) & (em > 0)):
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        rp = np.where(zp > 0, ep / np.where(zp > 0, zp, 1.0), 0.0)
        rm = np.where(zm > 0, em / np.where(zm > 0, zm, 1.0), 0.0)
    term_p = rm * zp - ep - 0.5 * (np.sqrt(rm * rp) * zp - ep)
    term_m = rp * zm - em - 0.5 * (np.sqrt(rp * rm) * zm - em)
    return float(np.sum(term_p) + np.sum(term_m))


# --------------------------------------------------------------------------
# Lagrangian / Hamiltonian pair
# --------------------------------------------------------------------------

def lagrangian(state: KineticState, flux) -> float:
    """Jump-entropy cost Ent(j2 | lambda sigma), +inf off the constraint.

    The transport flux must satisfy j1(., v) = v sigma(., v) cell-wise within
    FLUX_CONSTRAINT_RTOL (relative, with a mass-scale absolute floor);
    otherwise the pair is not finite-rate and the value is +inf.
    """
    v = state.params.speed
    lam = state.params.switch_rate
    atol = FLUX_CONSTRAINT_RTOL * v * max(1.0, float(state.mass())) / state.grid.n_cells
    ok = (np.allclose(flux.j1_plus, v * state.plus.weights,
                      rtol=FLUX_CONSTRAINT_RTOL, atol=atol)
          and np.allclose(flux.j1_minus, -v * state.minus.weights,
                          rtol=FLUX_CONSTRAINT_RTOL, atol=atol))
    if not ok:
        return math.inf
    return kinetic_rel_entropy(flux.j2_plus, flux.j2_minus,
                               lam * state.plus.weights,
                               lam * state.minus.weights)


def hamiltonian(state: KineticState, phi1, phi2) -> float:
    """integral [ v phi1 + lambda (e^{phi2} - 1) ] d sigma.

    phi1, phi2 are (plus_values, minus_values) pairs on cell centers.
    """
    v = state.params.speed
    lam = state.params.switch_rate
    p = state.plus.weights
    m = state.minus.weights
    out = v * float(np.sum(phi1[0] * p)) - v * float(np.sum(phi1[1] * m))
    out += lam * float(np.sum((np.exp(phi2[0]) - 1.0) * p))
    out += lam * float(np.sum((np.exp(phi2[1]) - 1.0) * m))
    return out


def dual_pairing(state: KineticState, flux, phi2) -> float:
    """integral phi2 d j2 - lambda integral (e^{phi2}-1) d sigma.

    Lower bound for lagrangian(state, flux) at every phi2; equality at
    phi2 = log(d j2 / d lambda sigma).
    """
    lam = state.params.switch_rate
    val = float(np.sum(phi2[0] * flux.j2_plus) + np.sum(phi2[1] * flux.j2_minus))
    val -= lam * float(np.sum((np.exp(phi2[0]) - 1.0) * state.plus.weights))
    val -= lam * float(np.sum((np.exp(phi2[1]) - 1.0) * state.minus.weights))
    return val


# --------------------------------------------------------------------------
# rate functional along trajectories
# --------------------------------------------------------------------------

def _interval_jump_entropy(flux, state: KineticState) -> float:
    lam = state.params.switch_rate
    return kinetic_rel_entropy(flux.j2_plus, flux.j2_minus,
                               lam * state.plus.weights,
                               lam * state.minus.weights)


def _check_flux_structure(traj) -> None:
    """Recorded j1 must encode a nonnegative midpoint state of matching mass."""
    v = traj.params.speed
    for k, flux in enumerate(traj.fluxes):
        plus = flux.j1_plus / v
        minus = -flux.j1_minus / v
        if np.any(plus < -1e-12) or np.any(minus < -1e-12):
            raise ValueError(f"interval {k}: j1 does not encode a state "
                             "(negative implied mass)")
        implied = float(plus.sum() + minus.sum())
        snap = traj.states[k].mass()
        if abs(implied - snap) > 1e-9 * max(1.0, abs(snap)):
            raise ValueError(f"interval {k}: flux mass {implied:.12e} "
                             f"does not match state mass {snap:.12e}")


def rate_functional(traj) -> float:
    """Time-integrated jump entropy: trapezoid of Ent(j2_k | lambda sigma)
    against the two endpoint states of each interval.

    Solver trajectories with midpoint fluxes are O(dt^2) near-zeros. +inf
    propagates from any interval (e.g. j2 != 0 while lambda = 0).
    """
    _check_flux_structure(traj)
    total = 0.0
    for k, flux in enumerate(traj.fluxes):
        dt = traj.times[k + 1] - traj.times[k]
        a = _interval_jump_entropy(flux, traj.states[k])
        if math.isinf(a):
            return math.inf
        b = _interval_jump_entropy(flux, traj.states[k + 1])
        if math.isinf(b):
            return math.inf
        total += 0.5 * dt * (a + b)
    return total


def rate_functional_rescaled(traj, alpha: float) -> float:
    """Rate functional in diffusive scaling: jump rate V^2 / (2 alpha).

    Speeding the velocities to +-V and the jump rate to V^2/(2 alpha) is,
    channel-mass for channel-mass, the original dynamics with
    lambda = V^2/(2 alpha); this wrapper asserts the trajectory was produced
    at that rate and delegates.
    """
    lam_expected = traj.params.speed ** 2 / (2.0 * alpha)
    if not math.isclose(traj.params.switch_rate, lam_expected,
                        rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(
            f"trajectory rate {traj.params.switch_rate} is not V^2/(2 alpha) "
            f"= {lam_expected} for alpha={alpha}")
    return rate_functional(traj)


def rate_cumulative(traj) -> np.ndarray:
    """Cumulative rate integral at snapshot times (rate_cum[0] = 0)."""
    _check_flux_structure(traj)
    out = np.zeros(len(traj.times))
    for k, flux in enumerate(traj.fluxes):
        dt = traj.times[k + 1] - traj.times[k]
        a = _interval_jump_entropy(flux, traj.states[k])
        b = _interval_jump_entropy(flux, traj.states[k + 1])
        out[k + 1] = out[k] + 0.5 * dt * (a + b)
    return out


# --------------------------------------------------------------------------
# entropy dissipation report (FIR inequality)
# --------------------------------------------------------------------------

@dataclass
class FunctionalReport:
    """Per-snapshot entropy/Fisher/rate bookkeeping and the FIR slack."""

    times: np.ndarray
    entropy: np.ndarray
    fi: np.ndarray
    fi_integral: np.ndarray      # lambda * integral_0^t FI dr (trapezoid)
    rate_cum: np.ndarray
    lhs: np.ndarray              # entropy_t + fi_integral_t
    rhs: np.ndarray              # entropy_0 + rate_cum_t
    slack: np.ndarray            # rhs - lhs
    dt: float
    mollify_eps: float | None = None

    @property
    def entropy_initial(self) -> float:
        return float(self.entropy[0])

    @property
    def entropy_final(self) -> float:
        return float(self.entropy[-1])

    @property
    def rate_value(self) -> float:
        return float(self.rate_cum[-1])

    @property
    def fir_slack(self) -> float:
        return float(np.min(self.slack))

    @property
    def slack_tolerance(self) -> float:
        return 1e-8 + 10.0 * self.dt ** 2

    def entropy_nonincreasing(self, tol: float | None = None) -> bool:
        tol = self.slack_tolerance if tol is None else tol
        return bool(np.all(np.diff(self.entropy) <= tol))

    def write(self, csv_path, json_path=None) -> None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "entropy", "fi", "fi_integral", "rate_cum",
                             "lhs", "rhs", "slack"])
            for i in range(len(self.times)):
                writer.writerow([repr(float(a[i])) for a in
                                 (self.times, self.entropy, self.fi,
                                  self.fi_integral, self.rate_cum, self.lhs,
                                  self.rhs, self.slack)])
        if json_path is not None:
            summary = {
                "entropy_initial": self.entropy_initial,
                "entropy_final": self.entropy_final,
                "rate_value": self.rate_value,
                "fir_slack": self.fir_slack,
                "slack_tolerance": self.slack_tolerance,
                "entropy_nonincreasing": self.entropy_nonincreasing(),
                "dt": self.dt,
                "mollify_eps": self.mollify_eps,
            }
            with open(json_path, "w") as fh:
                json.dump(summary, fh, indent=2, sort_keys=True)
                fh.write("\n")


def _trapezoid_cumulative(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


def mollify_trajectory(traj, eps: float):
    """Channel-wise mollification of every state and flux.

    Smoothing commutes with the shift/jump structure, so the mollified
    trajectory still satisfies the discrete continuity bookkeeping and its
    rate value never exceeds the original (joint convexity of Ent).
    """
    states = [KineticState(mollify(s.plus, eps), mollify(s.minus, eps), s.params)
              for s in traj.states]
    fluxes = [dataclasses.replace(
        f,
        j1_plus=mollify(GridMeasure(f.grid, f.j1_plus), eps).weights,
        j1_minus=mollify(GridMeasure(f.grid, f.j1_minus), eps).weights,
        j2_plus=mollify(GridMeasure(f.grid, f.j2_plus), eps).weights,
        j2_minus=mollify(GridMeasure(f.grid, f.j2_minus), eps).weights,
    ) for f in traj.fluxes]
    return dataclasses.replace(traj, states=states, fluxes=fluxes)


def fir_check(traj, mollify_eps: float | None = None) -> FunctionalReport:
    """Entropy-dissipation report along a trajectory.

    Checks the inequality entropy_t + lambda int_0^t FI <= entropy_0 +
    rate_cum_t snapshot by snapshot. Raises IllPreparedError when the initial
    state is an atom (all mass in one spatial cell): on the grid its entropy
    is still finite, but it is the discrete image of an initial datum with
    infinite entropy, and the report would be resolution artefact. Pass
    mollify_eps to smooth the whole trajectory first.
    """
    if mollify_eps is not None:
        traj = mollify_trajectory(traj, mollify_eps)
    sigma0 = traj.states[0]
    if is_atomlike(sigma0):
        raise IllPreparedError(
            "initial state is an atom; mollify it (mollify_eps) before "
            "asking for an entropy-dissipation report")
    ent0 = entropy_vs_uniform(sigma0)
    if math.isinf(ent0):
        raise IllPreparedError("initial entropy against the uniform reference "
                               "is infinite")
    times = np.asarray(traj.times, dtype=float)
    lam = traj.params.switch_rate
    entropy = np.array([entropy_vs_uniform(s) for s in traj.states])
    fi = np.array([fisher_info(s) for s in traj.states])
    fi_integral = lam * _trapezoid_cumulative(fi, times)
    rate_cum = rate_cumulative(traj)
    lhs = entropy + fi_integral
    rhs = entropy[0] + rate_cum
    dt = float(np.min(np.diff(times)))
    return FunctionalReport(times=times, entropy=entropy, fi=fi,
                            fi_integral=fi_integral, rate_cum=rate_cum,
                            lhs=lhs, rhs=rhs, slack=rhs - lhs, dt=dt,
                            mollify_eps=mollify_eps)


def generalized_fir_terms(traj, reference_traj) -> dict:
    """Both sides of the generalised entropy inequality against a moving
    reference trajectory (itself a solution). Reported, not sign-asserted:
    the underlying inequality is only formal.
    """
    times = np.asarray(traj.times, dtype=float)
    ent = np.array([
        kinetic_rel_entropy(s.plus.weights, s.minus.weights,
                            r.plus.weights, r.minus.weights)
        for s, r in zip(traj.states, reference_traj.states)])
    gfi = np.array([generalized_fi(s, r)
                    for s, r in zip(traj.states, reference_traj.states)])
    gfi_integral = _trapezoid_cumulative(gfi, times)
    rate_cum = rate_cumulative(traj)
    slack = (ent[0] + rate_cum) - (ent + gfi_integral)
    return {"times": times, "entropy": ent, "generalized_fi": gfi,
            "gfi_integral": gfi_integral, "rate_cum": rate_cum,
            "slack": slack}


# --------------------------------------------------------------------------
# projected (macroscopic) functional and its entropy terms
# --------------------------------------------------------------------------

def projected_functional(rho_traj, omega_traj, jump_traj, params: ModelParams,
                         times) -> float:
    """Jump entropy of the projected dynamics.

    jump_traj holds per-interval pairs (J1, J2): the mass and first moment of
    the jump flux. Finiteness forces the lifted flux channels
    (J1 +- J2/V) / 2 to be nonnegative (|J2| <= V J1, the flux-level cone
    condition); the transport moments are then omega and V^2 rho by
    construction and are not free inputs. Value 0 exactly at J = lambda
    (rho, omega), the weak macroscopic solution.
    """
    v = params.speed
    lam = params.switch_rate
    states = []
    for rho, omega in zip(rho_traj, omega_traj):
        states.append(lift_pi(DensityFluxPair(rho, omega), params))
    total = 0.0
    for k, (j1, j2) in enumerate(jump_traj):
        j1 = np.asarray(j1, dtype=float)
        j2 = np.asarray(j2, dtype=float)
        jp = 0.5 * (j1 + j2 / v)
        jm = 0.5 * (j1 - j2 / v)
        if np.any(jp < -1e-12) or np.any(jm < -1e-12):
            raise ConeViolationError("jump flux pair leaves the cone "
                                     "|J2| <= V * J1")
        jp = np.maximum(jp, 0.0)
        jm = np.maximum(jm, 0.0)
        dt = times[k + 1] - times[k]
        a = kinetic_rel_entropy(jp, jm, lam * states[k].plus.weights,
                                lam * states[k].minus.weights)
        b = kinetic_rel_entropy(jp, jm, lam * states[k + 1].plus.weights,
                                lam * states[k + 1].minus.weights)
        if math.isinf(a) or math.isinf(b):
            return math.inf
        total += 0.5 * dt * (a + b)
    return total


def project_trajectory(traj):
    """(rho_t, omega_t, (J1, J2)_k, times) view of a kinetic trajectory."""
    rho_traj = [s.rho() for s in traj.states]
    omega_traj = [s.omega() for s in traj.states]
    v = traj.params.speed
    jump_traj = [(f.j2_plus + f.j2_minus, v * (f.j2_plus - f.j2_minus))
                 for f in traj.fluxes]
    return rho_traj, omega_traj, jump_traj, np.asarray(traj.times, dtype=float)


@dataclass
class ProjectedFirTerms:
    times: np.ndarray
    rho_entropy: np.ndarray       # Ent(rho_t | Lebesgue)
    metric_speed: np.ndarray      # integral |d omega / d rho|^2 d rho at t
    metric_cum: np.ndarray        # G_t, trapezoid cumulative
    omega_tv: np.ndarray
    tv_constant: float            # fitted c with ||omega||_TV <= c sqrt(T)


def projected_fir_terms(rho_traj, omega_traj, times) -> ProjectedFirTerms:
    """Macroscopic entropy/metric bookkeeping.

    metric_speed_t = sum_i omega_i^2 / rho_i (mass quotient, 0/0 := 0);
    the space-time TV bound fit is c = max_t integral_0^t ||omega_r||_TV dr
    / sqrt(t) over snapshot times (rho is a probability, so its space-time TV
    mass over [0, t] is t).
    """
    times = np.asarray(times, dtype=float)
    speeds = []
    tvs = []
    ents = []
    for rho, omega in zip(rho_traj, omega_traj):
        m = _checked_masses(rho.weights, "rho")
        w = np.asarray(omega.weights, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(m > 0, w ** 2 / np.where(m > 0, m, 1.0), 0.0)
        if np.any((m == 0) & (np.abs(w) > 1e-14)):
            speeds.append(math.inf)
        else:
            speeds.append(float(np.sum(q)))
        tvs.append(tv_norm(omega))
        ents.append(rho_entropy_vs_lebesgue(rho))
    speeds = np.array(speeds)
    tvs = np.array(tvs)
    metric_cum = _trapezoid_cumulative(speeds, times)
    tv_cum = _trapezoid_cumulative(tvs, times)
    with np.errstate(divide="ignore", invalid="ignore"):
        cs = np.where(times > 0, tv_cum / np.sqrt(np.where(times > 0, times, 1.0)),
                      0.0)
    return ProjectedFirTerms(times=times, rho_entropy=np.array(ents),
                             metric_speed=speeds, metric_cum=metric_cum,
                             omega_tv=tvs, tv_constant=float(np.max(cs)))


# --------------------------------------------------------------------------
# limit functionals
# --------------------------------------------------------------------------

def _spectral_divergence(weights: np.ndarray) -> np.ndarray:
    """d/dx of the band-limited interpolant, returned as cell masses."""
    n = len(weights)
    k = np.fft.fftfreq(n, d=1.0 / n)
    return np.real(np.fft.ifft(2j * np.pi * k * np.fft.fft(weights)))


def _centered_log_derivative(values: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(values, -1) - np.roll(values, 1)) / (2.0 * dx)


def continuity_residuals(rho_traj, omega_avgs, times) -> np.ndarray:
    """TV norm of rho_{k+1} - rho_k + dt * div(omega_bar_k) per interval.

    The divergence is spectral and omega_avgs are per-interval time averages,
    so exact reference pairs have round-off residuals.
    """
    res = []
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        r = (rho_traj[k + 1].weights - rho_traj[k].weights
             + dt * _spectral_divergence(omega_avgs[k].weights))
        res.append(float(np.sum(np.abs(r))))
    return np.array(res)


@dataclass
class DiffusiveLimitReport:
    value: float
    fisher_term: float           # integral |d log rho|^2 d rho dt
    metric_term: float           # integral |d omega/d rho|^2 d rho dt
    cross_term: float            # integral (d log rho)(d omega/d rho) d rho dt
    entropy_difference: float    # Ent(rho_T | Leb) - Ent(rho_0 | Leb)
    two_way_gap: float           # |2 value - ((a/2)F + (1/2a)M + C)|
    alt_value: float | None      # same form with D rho replaced by -2 J
    residuals: np.ndarray

    def decomposition_value(self, alpha: float) -> float:
        return 0.5 * (0.5 * alpha * self.fisher_term
                      + 0.5 / alpha * self.metric_term
                      + self.cross_term)


def limit_functional_diffusive(rho_traj, omega_avgs, alpha: float, times,
                               jump_avgs=None) -> DiffusiveLimitReport:
    """Parabolic-limit cost (1/4 alpha) int int |alpha dDrho/drho +
    domega/drho|^2 drho dt of a macroscopic trajectory.

    rho_traj: snapshot measures (strictly positive cells, else +inf sentinel).
    omega_avgs: per-interval time-averaged fluxes; the pair must satisfy the
    discrete continuity equation (spectral weak form) to RESIDUAL_TOL per
    interval, else ContinuityViolationError.
    Drho uses centered differences of cell densities. The report carries the
    squared-form value, its Fisher/metric/cross decomposition (the two-way
    identity is algebraic and checked to 1e-8), the honest entropy difference
    for comparison, and optionally the same cost with dDrho/drho replaced by
    -2 dJ/drho when per-interval jump averages are given.
    """
    times = np.asarray(times, dtype=float)
    residuals = continuity_residuals(rho_traj, omega_avgs, times)
    worst = int(np.argmax(residuals))
    if residuals[worst] > RESIDUAL_TOL:
        raise ContinuityViolationError(
            f"continuity residual {residuals[worst]:.3e} > {RESIDUAL_TOL:.1e} "
            f"on interval {worst}")
    dx = rho_traj[0].grid.dx
    value = fisher = metric = cross = 0.0
    alt_value = 0.0 if jump_avgs is not None else None
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        m = 0.5 * (rho_traj[k].weights + rho_traj[k + 1].weights)
        if np.any(m <= 0):
            return DiffusiveLimitReport(math.inf, math.inf, math.inf, math.inf,
                                        math.inf, 0.0, None, residuals)
        dens = m / dx
        a = _centered_log_derivative(dens, dx) / dens     # dDrho/drho
        b = omega_avgs[k].weights / m                     # domega/drho
        value += dt * float(np.sum((alpha * a + b) ** 2 * m)) / (4 * alpha)
        fisher += dt * float(np.sum(a ** 2 * m))
        metric += dt * float(np.sum(b ** 2 * m))
        cross += dt * float(np.sum(a * b * m))
        if jump_avgs is not None:
            aj = -2.0 * np.asarray(jump_avgs[k], dtype=float) / m
            alt_value += dt * float(np.sum((alpha * aj + b) ** 2 * m)) / (4 * alpha)
    ent_diff = (rho_entropy_vs_lebesgue(rho_traj[-1])
                - rho_entropy_vs_lebesgue(rho_traj[0]))
    two_way = abs(2.0 * value - (0.5 * alpha * fisher + 0.5 / alpha * metric
                                 + cross))
    return DiffusiveLimitReport(value=value, fisher_term=fisher,
                                metric_term=metric, cross_term=cross,
                                entropy_difference=ent_diff, two_way_gap=two_way,
                                alt_value=alt_value, residuals=residuals)


@dataclass
class MomentumTrajectory:
    """Macroscopic pair with the interval averages the residual checks need."""

    times: np.ndarray
    rho: list
    omega: list
    rho_avg: list
    omega_avg: list
    jump_avg: list               # per-interval first moment of the jump flux

    @staticmethod
    def from_kinetic(traj) -> "MomentumTrajectory":
        rho = [s.rho() for s in traj.states]
        omega = [s.omega() for s in traj.states]
        grid = traj.grid
        v = traj.params.speed
        rho_avg, omega_avg, jump_avg = [], [], []
        for k, f in enumerate(traj.fluxes):
            mid = f.midpoint_state(traj.params)
            rho_avg.append(mid.rho())
            omega_avg.append(mid.omega())
            jump_avg.append(GridMeasure(grid, v * (f.j2_plus - f.j2_minus)))
        return MomentumTrajectory(np.asarray(traj.times, dtype=float), rho,
                                  omega, rho_avg, omega_avg, jump_avg)

    @staticmethod
    def from_wave(rho0: GridMeasure, omega0: GridMeasure, speed: float,
                  times) -> "MomentumTrajectory":
        """Exact free-streaming pair: half-sum invariants translate at +-V.

        Snapshots and interval averages are spectral, so the momentum
        residuals vanish to round-off.
        """
        times = np.asarray(times, dtype=float)
        grid = rho0.grid
        n = grid.n_cells
        k = np.fft.fftfreq(n, d=1.0 / n)
        sp0 = np.fft.fft(0.5 * (rho0.weights + omega0.weights / speed))
        sm0 = np.fft.fft(0.5 * (rho0.weights - omega0.weights / speed))
        phase = -2j * np.pi * k * speed

        def snap(t):
            sp = sp0 * np.exp(phase * t)
            sm = sm0 * np.exp(-phase * t)
            rho = np.real(np.fft.ifft(sp + sm))
            om = speed * np.real(np.fft.ifft(sp - sm))
            return GridMeasure(grid, rho), GridMeasure(grid, om)

        def avg(t0, t1):
            dt = t1 - t0
            with np.errstate(divide="ignore", invalid="ignore"):
                fp = np.where(k == 0, 1.0,
                              (np.exp(phase * dt) - 1.0)
                              / np.where(k == 0, 1.0, phase * dt))
                fm = np.where(k == 0, 1.0,
                              (np.exp(-phase * dt) - 1.0)
                              / np.where(k == 0, 1.0, -phase * dt))
            sp = sp0 * np.exp(phase * t0) * fp
            sm = sm0 * np.exp(-phase * t0) * fm
            rho = np.real(np.fft.ifft(sp + sm))
            om = speed * np.real(np.fft.ifft(sp - sm))
            return GridMeasure(grid, rho), GridMeasure(grid, om)

        rho_list, omega_list = [], []
        for t in times:
            r, o = snap(t)
            rho_list.append(r)
            omega_list.append(o)
        rho_avg, omega_avg, jump_avg = [], [], []
        for k2 in range(len(times) - 1):
            r, o = avg(times[k2], times[k2 + 1])
            rho_avg.append(r)
            omega_avg.append(o)
            jump_avg.append(GridMeasure(grid, np.zeros(n)))
        return MomentumTrajectory(times, rho_list, omega_list, rho_avg,
                                  omega_avg, jump_avg)


def momentum_residuals(mt: MomentumTrajectory, speed: float
                       ) -> tuple[np.ndarray, np.ndarray]:
    """TV residuals of both macroscopic balance laws per interval."""
    res1, res2 = [], []
    for k in range(len(mt.times) - 1):
        dt = mt.times[k + 1] - mt.times[k]
        r1 = (mt.rho[k + 1].weights - mt.rho[k].weights
              + dt * _spectral_divergence(mt.omega_avg[k].weights))
        r2 = (mt.omega[k + 1].weights - mt.omega[k].weights
              + dt * speed ** 2 * _spectral_divergence(mt.rho_avg[k].weights)
              + 2.0 * dt * mt.jump_avg[k].weights)
        res1.append(float(np.sum(np.abs(r1))))
        res2.append(float(np.sum(np.abs(r2))))
    return np.array(res1), np.array(res2)


def limit_functional_hyperbolic(mt: MomentumTrajectory, speed: float) -> float:
    """Vanishing-rate limit cost: 0 on momentum-equation solutions with zero
    jump flux, +inf otherwise (both residuals and the total jump TV mass are
    gated at RESIDUAL_TOL)."""
    res1, res2 = momentum_residuals(mt, speed)
    jump_tv = sum((mt.times[k + 1] - mt.times[k])
                  * float(np.sum(np.abs(mt.jump_avg[k].weights)))
                  for k in range(len(mt.times) - 1))
    if np.any(res1 > RESIDUAL_TOL) or np.any(res2 > RESIDUAL_TOL):
        return math.inf
    if jump_tv > RESIDUAL_TOL:
        return math.inf
    return 0.0


# --------------------------------------------------------------------------
# structural blocks of the dissipative formulation
# --------------------------------------------------------------------------

@dataclass
class StructureBlocks:
    """Entropy, drift blocks, dissipation potential and dual Hamiltonian of
    the macroscopic pair, plus the discrete orthogonality defect."""

    entropy: float
    b1: tuple                    # (omega, 0) as GridMeasures
    b2: tuple                    # (V^2 rho, 0)
    orthogonality: float
    dissipation_at: callable     # (xi1, xi2) -> float
    dual_hamiltonian: callable   # (psi11, psi12, psi21, psi22) -> float


def pregeneric_blocks(rho: GridMeasure, omega: GridMeasure,
                      params: ModelParams) -> StructureBlocks:
    """Structural blocks at a strictly positive macroscopic state.

    entropy: lifted relative entropy against the uniform kinetic reference.
    b1, b2: drift blocks (omega, 0) and (V^2 rho, 0).
    orthogonality: centered-difference pairing of the entropy gradient with
    the drift, <grad dS, B>; identically zero in the continuum, O(dx^2) on
    the grid.
    dissipation_at(xi1, xi2): 2 lambda integral sqrt(s+ s-) e^{V xi1^2/2}
    (cosh(V xi2^2) - 1); zero at xi = 0, nonnegative everywhere.
    dual_hamiltonian(psi11, psi12, psi21, psi22): integral psi11 d omega +
    V^2 psi12 d rho + lambda e^{psi21}(cosh(V psi22) - 1) d rho +
    (lambda/V) e^{psi21} sinh(V psi22) d omega.
    """
    v = params.speed
    lam = params.switch_rate
    state = lift_pi(DensityFluxPair(rho, omega), params)
    grid = rho.grid
    zero = GridMeasure(grid, np.zeros(grid.n_cells))
    mp = state.plus.weights
    mm = state.minus.weights
    if np.any(mp <= 0) or np.any(mm <= 0):
        raise DegenerateStateError("entropy gradient needs strictly positive "
                                   "channel masses in every cell")
    ref = uniform_reference_masses(grid)
    entropy = kinetic_rel_entropy(mp, mm, ref, ref)

    up = np.log(mp / ref)
    um = np.log(mm / ref)
    ds_drho = 0.5 * (up + um)
    ds_domega = (up - um) / (2.0 * v)
    dx = grid.dx
    d_rho_part = _centered_log_derivative(ds_drho, dx)
    d_omega_part = _centered_log_derivative(ds_domega, dx)
    orth = (float(np.sum(d_rho_part * omega.weights))
            + v ** 2 * float(np.sum(d_omega_part * rho.weights)))

    geo_mean = np.sqrt(mp * mm)

    def dissipation_at(xi1, xi2) -> float:
        xi1 = np.asarray(xi1, dtype=float)
        xi2 = np.asarray(xi2, dtype=float)
        return 2.0 * lam * float(np.sum(
            geo_mean * np.exp(v * xi1 ** 2 / 2.0)
            * (np.cosh(v * xi2 ** 2) - 1.0)))

    def dual_hamiltonian(psi11, psi12, psi21, psi22) -> float:
        psi11 = np.asarray(psi11, dtype=float)
        psi12 = np.asarray(psi12, dtype=float)
        psi21 = np.asarray(psi21, dtype=float)
        psi22 = np.asarray(psi22, dtype=float)
        out = float(np.sum(psi11 * omega.weights))
        out += v ** 2 * float(np.sum(psi12 * rho.weights))
        out += lam * float(np.sum(np.exp(psi21) * (np.cosh(v * psi22) - 1.0)
                                  * rho.weights))
        out += lam / v * float(np.sum(np.exp(psi21) * np.sinh(v * psi22)
                                      * omega.weights))
        return out

    return StructureBlocks(entropy=entropy,
                           b1=(omega.copy(), zero.copy()),
                           b2=(GridMeasure(grid, v ** 2 * rho.weights), zero),
                           orthogonality=orth,
                           dissipation_at=dissipation_at,
                           dual_hamiltonian=dual_hamiltonian)


# --------------------------------------------------------------------------
# test-function bank
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunctionGrid:
    """Named scalar test function sampled at cell centers."""

    name: str
    values: np.ndarray


def test_function_bank(grid: TorusGrid, alpha: float | None = None,
                       rho_bar: GridMeasure | None = None
                       ) -> list[TestFunctionGrid]:
    """sin/cos probes plus the data-adaptive -alpha d/dx log(rho_bar)."""
    x = grid.centers()
    bank = [
        TestFunctionGrid("sin_2pix", np.sin(2 * np.pi * x)),
        TestFunctionGrid("cos_2pix", np.cos(2 * np.pi * x)),
        TestFunctionGrid("sin_4pix", np.sin(4 * np.pi * x)),
    ]
    if alpha is not None and rho_bar is not None:
        dens = np.maximum(rho_bar.densities(), POSITIVITY_FLOOR)
        adaptive = -alpha * _centered_log_derivative(np.log(dens), grid.dx)
        bank.append(TestFunctionGrid("adaptive_log_gradient", adaptive))
    return bank
