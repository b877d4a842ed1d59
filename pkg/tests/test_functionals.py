import dataclasses
import math

import numpy as np
import pytest
from pytest import approx, mark
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kacfc import (
    ConeViolationError,
    ContinuityViolationError,
    DegenerateStateError,
    FluxPair,
    GridMeasure,
    IllPreparedError,
    KineticState,
    ModelParams,
    MomentumTrajectory,
    SolverConfig,
    TorusGrid,
    dual_pairing,
    entropy_vs_uniform,
    fir_check,
    fisher_info,
    generalized_fi,
    hamiltonian,
    kinetic_rel_entropy,
    lagrangian,
    limit_functional_diffusive,
    limit_functional_hyperbolic,
    make_bump,
    make_dirac,
    make_uniform,
    mollify_trajectory,
    momentum_residuals,
    pregeneric_blocks,
    project_trajectory,
    projected_fir_terms,
    projected_functional,
    rate_cumulative,
    rate_functional,
    rate_functional_rescaled,
    rel_entropy,
    rho_entropy_vs_lebesgue,
    solve,
)
from kacfc import test_function_bank as function_bank
from kacfc.functionals import continuity_residuals

PARAMS = ModelParams(speed=2.0, switch_rate=0.5)

TWO_LOG_TWO_MINUS_ONE = 2.0 * math.log(2.0) - 1.0


def uniform_measure(n=16):
    grid = TorusGrid(n)
    return GridMeasure(grid, np.full(n, 1.0 / n))


def one_sided_state(n=16):
    grid = TorusGrid(n)
    return KineticState(GridMeasure(grid, np.full(n, 1.0 / n)),
                        GridMeasure(grid, np.zeros(n)), PARAMS)


def canonical_flux(state):
    v = state.params.speed
    lam = state.params.switch_rate
    return FluxPair(state.grid, v * state.plus.weights,
                    -v * state.minus.weights, lam * state.plus.weights,
                    lam * state.minus.weights)


@st.composite
def kinetic_states(draw, n_options=(8, 16, 32)):
    n = draw(st.sampled_from(list(n_options)))
    plus = draw(arrays(float, n, elements=st.floats(1e-4, 1.0)))
    minus = draw(arrays(float, n, elements=st.floats(1e-4, 1.0)))
    grid = TorusGrid(n)
    total = plus.sum() + minus.sum()
    return KineticState(GridMeasure(grid, plus / total),
                        GridMeasure(grid, minus / total), PARAMS)


# --------------------------------------------------------------------------
# entropies
# --------------------------------------------------------------------------

def test_rel_entropy_of_doubled_measure():
    nu = uniform_measure()
    mu = GridMeasure(nu.grid, 2.0 * nu.weights)
    assert rel_entropy(mu, nu) == approx(TWO_LOG_TWO_MINUS_ONE, rel=1e-14)
    assert rel_entropy(nu, nu) == 0.0


def test_rel_entropy_off_support_is_infinite():
    grid = TorusGrid(4)
    nu = GridMeasure(grid, np.array([0.5, 0.5, 0.0, 0.0]))
    mu = GridMeasure(grid, np.array([0.25, 0.25, 0.5, 0.0]))
    assert rel_entropy(mu, nu) == math.inf
    assert kinetic_rel_entropy(mu.weights, mu.weights,
                               nu.weights, nu.weights) == math.inf


@given(a=arrays(float, 8, elements=st.floats(1e-4, 1.0)),
       b=arrays(float, 8, elements=st.floats(1e-4, 1.0)))
def test_rel_entropy_nonnegative(a, b):
    grid = TorusGrid(8)
    mu = GridMeasure(grid, a)
    nu = GridMeasure(grid, b)
    assert rel_entropy(mu, nu) >= 0.0
    assert rel_entropy(mu, mu) == 0.0


def test_rel_entropy_zero_only_at_equality():
    nu = uniform_measure(8)
    tilted = GridMeasure(nu.grid, nu.weights * (1 + 1e-3 * np.arange(8)))
    assert rel_entropy(tilted, nu) > 0.0


def test_entropy_vs_uniform_matches_bessel_closed_form():
    # rho ~ exp(a cos 2 pi x): Ent = a I1(a)/I0(a) - log I0(a); the periodic
    # trapezoid quadrature is spectrally accurate so the grid value matches
    # to round-off already at modest n
    from scipy.special import i0, i1

    a = 2.0
    state = make_bump(TorusGrid(64), PARAMS, concentration=a)
    exact = a * i1(a) / i0(a) - math.log(i0(a))
    assert entropy_vs_uniform(state) == approx(exact, rel=1e-12)


def test_entropy_of_uniform_state_is_zero():
    assert entropy_vs_uniform(make_uniform(TorusGrid(32), PARAMS)) == 0.0
    assert rho_entropy_vs_lebesgue(uniform_measure(32)) == approx(0.0, abs=1e-15)


# --------------------------------------------------------------------------
# Fisher information
# --------------------------------------------------------------------------

def test_fisher_info_examples():
    assert fisher_info(make_uniform(TorusGrid(16), PARAMS)) == 0.0
    assert fisher_info(one_sided_state()) == approx(1.0, rel=1e-14)


@given(state=kinetic_states())
def test_fisher_info_nonnegative_and_zero_iff_symmetric(state):
    assert fisher_info(state) >= 0.0
    symmetric = KineticState(state.plus, state.plus, PARAMS)
    assert fisher_info(symmetric) == 0.0


@given(a=kinetic_states(n_options=(8,)), b=kinetic_states(n_options=(8,)),
       t=st.floats(0.0, 1.0))
def test_fisher_info_convex_along_mixtures(a, b, t):
    mix = KineticState(
        GridMeasure(a.grid, t * a.plus.weights + (1 - t) * b.plus.weights),
        GridMeasure(a.grid, t * a.minus.weights + (1 - t) * b.minus.weights),
        PARAMS)
    bound = t * fisher_info(a) + (1 - t) * fisher_info(b)
    assert fisher_info(mix) <= bound + 1e-12


@given(state=kinetic_states())
def test_generalized_fi_reduces_to_half_fisher_info(state):
    assert generalized_fi(state, state) == approx(0.0, abs=1e-15)
    ref = make_uniform(state.grid, PARAMS)
    assert generalized_fi(state, ref) == approx(0.5 * fisher_info(state),
                                                rel=1e-12, abs=1e-14)


def test_generalized_fi_off_support():
    state = one_sided_state(8)
    ref = KineticState(state.minus.copy(), state.plus.copy(), PARAMS)
    assert generalized_fi(state, ref) == math.inf


# --------------------------------------------------------------------------
# Lagrangian, Hamiltonian, duality
# --------------------------------------------------------------------------

@given(state=kinetic_states())
def test_lagrangian_zero_at_exact_flux(state):
    assert lagrangian(state, canonical_flux(state)) == 0.0


def test_lagrangian_constant_tilt():
    state = make_bump(TorusGrid(16), PARAMS)
    flux = canonical_flux(state)
    tilted = dataclasses.replace(flux, j2_plus=2.0 * flux.j2_plus,
                                 j2_minus=2.0 * flux.j2_minus)
    expected = TWO_LOG_TWO_MINUS_ONE * PARAMS.switch_rate
    assert lagrangian(state, tilted) == approx(expected, rel=1e-14)


def test_lagrangian_infinite_off_transport_constraint():
    state = make_bump(TorusGrid(16), PARAMS)
    flux = canonical_flux(state)
    broken = dataclasses.replace(flux, j1_plus=1.01 * flux.j1_plus)
    assert lagrangian(state, broken) == math.inf


def test_hamiltonian_examples():
    state = one_sided_state()
    n = state.grid.n_cells
    zero = np.zeros(n)
    one = np.ones(n)
    assert hamiltonian(state, (zero, zero), (zero, zero)) == 0.0
    assert hamiltonian(state, (one, one), (zero, zero)) == approx(PARAMS.speed)


@settings(max_examples=40)
@given(state=kinetic_states(), tilt=arrays(float, 8,
                                           elements=st.floats(0.2, 3.0)))
def test_duality_closed_form_argmax(state, tilt):
    # sup over phi2 of the dual pairing is attained at log(dj2 / lambda dsigma)
    # and equals the lagrangian; any other phi2 stays below
    lam = PARAMS.switch_rate
    reps = state.grid.n_cells // 8
    factor = np.tile(tilt, reps)
    flux = canonical_flux(state)
    flux = dataclasses.replace(flux, j2_plus=factor * flux.j2_plus,
                               j2_minus=factor[::-1] * flux.j2_minus)
    lag = lagrangian(state, flux)
    phi_star = (np.log(flux.j2_plus / (lam * state.plus.weights)),
                np.log(flux.j2_minus / (lam * state.minus.weights)))
    assert dual_pairing(state, flux, phi_star) == approx(lag, abs=1e-9)
    nudged = (phi_star[0] + 0.1, phi_star[1] - 0.05)
    assert dual_pairing(state, flux, nudged) <= lag + 1e-12


# --------------------------------------------------------------------------
# rate functional along trajectories
# --------------------------------------------------------------------------

def stationary_trajectory(t_final=1.0, n=16):
    grid = TorusGrid(n)
    return solve(make_uniform(grid, PARAMS),
                 SolverConfig(dt=grid.dx / PARAMS.speed, t_final=t_final))


def test_rate_zero_on_stationary_trajectory():
    assert rate_functional(stationary_trajectory()) == 0.0


def test_rate_constant_tilt_closed_form():
    # j2 -> (1 + eps) lambda sigma on the stationary path costs
    # T lambda ((1+eps) log(1+eps) - eps)
    eps = 0.3
    traj = stationary_trajectory(t_final=1.0)
    tilted = dataclasses.replace(traj, fluxes=[
        dataclasses.replace(f, j2_plus=(1 + eps) * f.j2_plus,
                            j2_minus=(1 + eps) * f.j2_minus)
        for f in traj.fluxes])
    assert rate_functional(tilted) == approx(0.020536771903869176, rel=1e-12)


def test_rate_second_order_in_dt():
    grid = TorusGrid(64)
    init = make_bump(grid, PARAMS, concentration=2.0)
    rates = {}
    for shift in (2, 1):
        dt = shift * grid.dx / PARAMS.speed
        rates[shift] = rate_functional(
            solve(init, SolverConfig(dt=dt, t_final=0.25)))
    assert rates[1] > 0
    assert 3.5 <= rates[2] / rates[1] <= 4.5


def test_rate_cumulative_monotone_and_consistent():
    grid = TorusGrid(32)
    traj = solve(make_bump(grid, PARAMS, concentration=2.0),
                 SolverConfig(dt=grid.dx / PARAMS.speed, t_final=0.2))
    cum = rate_cumulative(traj)
    assert cum[0] == 0.0
    assert np.all(np.diff(cum) >= 0)
    assert cum[-1] == approx(rate_functional(traj), rel=1e-14)


def test_rate_rescaled_checks_the_rate():
    alpha = PARAMS.speed ** 2 / (2.0 * PARAMS.switch_rate)
    traj = stationary_trajectory()
    assert rate_functional_rescaled(traj, alpha) == 0.0
    with pytest.raises(ValueError):
        rate_functional_rescaled(traj, 2.0 * alpha)


# --------------------------------------------------------------------------
# FIR report
# --------------------------------------------------------------------------

def test_fir_on_stationary_trajectory():
    report = fir_check(stationary_trajectory())
    np.testing.assert_array_equal(report.entropy, 0.0)
    np.testing.assert_array_equal(report.slack, 0.0)
    assert report.fir_slack == 0.0


def bump_report(n=128, t_final=0.25):
    grid = TorusGrid(n)
    traj = solve(make_bump(grid, PARAMS, concentration=2.0),
                 SolverConfig(dt=grid.dx / PARAMS.speed, t_final=t_final))
    return fir_check(traj)


def test_fir_slack_and_entropy_lyapunov():
    report = bump_report()
    assert report.fir_slack >= -report.slack_tolerance
    # the entropy itself is a Lyapunov function, to a much tighter tolerance
    # than the slack needs
    assert report.entropy_nonincreasing(tol=1e-10)
    assert report.entropy_final < report.entropy_initial


def test_fir_slack_tolerance_formula():
    report = bump_report()
    assert report.slack_tolerance == approx(1e-8 + 10.0 * report.dt ** 2)


def test_fir_rejects_atomic_start_and_accepts_mollified():
    grid = TorusGrid(128)
    traj = solve(make_dirac(grid, PARAMS),
                 SolverConfig(dt=grid.dx / PARAMS.speed, t_final=0.05))
    with pytest.raises(IllPreparedError):
        fir_check(traj)
    report = fir_check(traj, mollify_eps=1e-3)
    assert math.isfinite(report.entropy_initial)
    assert report.mollify_eps == 1e-3
    assert report.entropy_nonincreasing()
    assert report.fir_slack >= -report.slack_tolerance


def test_fir_report_serialisation(tmp_path):
    report = bump_report(n=32, t_final=0.1)
    csv_path = tmp_path / "fir.csv"
    json_path = tmp_path / "fir.json"
    report.write(csv_path, json_path)
    header = csv_path.read_text().splitlines()[0]
    assert header == "t,entropy,fi,fi_integral,rate_cum,lhs,rhs,slack"
    import json

    summary = json.loads(json_path.read_text())
    assert summary["fir_slack"] == report.fir_slack
    assert summary["entropy_nonincreasing"] is True


def test_mollification_never_raises_the_rate():
    grid = TorusGrid(64)
    traj = solve(make_bump(grid, PARAMS, concentration=2.0),
                 SolverConfig(dt=grid.dx / PARAMS.speed, t_final=0.1))
    before = rate_functional(traj)
    after = rate_functional(mollify_trajectory(traj, 1e-3))
    assert after <= before + 1e-9


# --------------------------------------------------------------------------
# projected (macroscopic) functional
# --------------------------------------------------------------------------

def test_projected_equals_kinetic_rate():
    grid = TorusGrid(64)
    traj = solve(make_bump(grid, PARAMS, concentration=2.0),
                 SolverConfig(dt=grid.dx / PARAMS.speed, t_final=0.1))
    rho_traj, omega_traj, jump_traj, times = project_trajectory(traj)
    value = projected_functional(rho_traj, omega_traj, jump_traj, PARAMS, times)
    assert value == approx(rate_functional(traj), abs=1e-12)


def static_pair(drift=0.3):
    state = make_bump(TorusGrid(64), PARAMS, drift_fraction=drift)
    return state.rho(), state.omega()


def test_projected_zero_at_canonical_jump():
    rho, omega = static_pair()
    lam = PARAMS.switch_rate
    times = np.array([0.0, 0.4, 0.8])
    jumps = [(lam * rho.weights, lam * omega.weights)] * 2
    assert projected_functional([rho] * 3, [omega] * 3, jumps, PARAMS,
                                times) == 0.0


def test_projected_doubled_moment_closed_form():
    # doubling the first moment of the jump flux at constant drift u costs
    # (lambda/2)[(1+2u) log((1+2u)/(1+u)) + (1-2u) log((1-2u)/(1-u))] per
    # unit time and mass
    u = 0.3
    rho, omega = static_pair(drift=u)
    lam = PARAMS.switch_rate
    T = 0.8
    times = np.array([0.0, 0.4, T])
    jumps = [(lam * rho.weights, 2.0 * lam * omega.weights)] * 2
    value = projected_functional([rho] * 3, [omega] * 3, jumps, PARAMS, times)
    g = ((1 + 2 * u) * math.log((1 + 2 * u) / (1 + u))
         + (1 - 2 * u) * math.log((1 - 2 * u) / (1 - u)))
    assert value == approx(T * lam / 2.0 * g, rel=1e-12)


def test_projected_rejects_flux_cone_violation():
    rho, omega = static_pair(drift=0.0)
    lam = PARAMS.switch_rate
    # |J2| > V J1 somewhere
    jumps = [(lam * rho.weights, 2.0 * PARAMS.speed * lam * rho.weights)]
    with pytest.raises(ConeViolationError):
        projected_functional([rho] * 2, [omega] * 2, jumps, PARAMS,
                             np.array([0.0, 0.5]))


def test_projected_fir_terms_constant_quotient():
    rho, _ = static_pair()
    c = 0.7
    omega = GridMeasure(rho.grid, c * rho.weights)
    times = np.linspace(0.0, 2.0, 9)
    terms = projected_fir_terms([rho] * 9, [omega] * 9, times)
    np.testing.assert_allclose(terms.metric_speed, c ** 2, rtol=1e-13)
    np.testing.assert_allclose(terms.metric_cum, c ** 2 * times, rtol=1e-13)
    zero_terms = projected_fir_terms(
        [rho] * 9, [GridMeasure(rho.grid, np.zeros(rho.grid.n_cells))] * 9,
        times)
    np.testing.assert_array_equal(zero_terms.metric_cum, 0.0)
    assert zero_terms.tv_constant == 0.0


# --------------------------------------------------------------------------
# diffusive limit functional
# --------------------------------------------------------------------------

def heat_pair(n, alpha, t_final, n_times, delta=0.0):
    # exact advected heat flow: rho_hat(t) = rho_hat(0) e^{zt} with
    # z = -alpha k'^2 - i k' delta, and omega the exact interval average of
    # -alpha d_x rho + delta rho, so the continuity residual is round-off
    grid = TorusGrid(n)
    x = grid.centers()
    w0 = np.exp(0.25 * np.cos(2 * np.pi * x))
    w0 /= w0.sum()
    k = np.fft.fftfreq(n, d=1.0 / n)
    kp = 2 * np.pi * k
    z = -alpha * kp ** 2 - 1j * kp * delta
    h0 = np.fft.fft(w0)
    times = np.linspace(0.0, t_final, n_times)
    rhos = [GridMeasure(grid, np.real(np.fft.ifft(h0 * np.exp(z * t))))
            for t in times]
    omegas = []
    for j in range(n_times - 1):
        dt = times[j + 1] - times[j]
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(z == 0, 1.0,
                           (np.exp(z * times[j + 1]) - np.exp(z * times[j]))
                           / np.where(z == 0, 1.0, z * dt))
        omegas.append(GridMeasure(
            grid, np.real(np.fft.ifft((-alpha * 1j * kp + delta) * h0 * fac))))
    return rhos, omegas, times


def test_diffusive_limit_near_zero_on_heat_flow():
    alpha = 4.0
    rhos, omegas, times = heat_pair(128, alpha, 0.1, 81)
    report = limit_functional_diffusive(rhos, omegas, alpha, times)
    assert report.value <= rhos[0].grid.dx ** 2
    assert report.two_way_gap <= 1e-8
    assert np.max(report.residuals) <= 1e-12


def test_diffusive_limit_constant_drift_offset():
    # omega = -alpha d_x rho + delta rho costs T delta^2 / (4 alpha)
    alpha = 4.0
    delta = 0.4
    t_final = 0.1
    rhos, omegas, times = heat_pair(128, alpha, t_final, 81, delta=delta)
    report = limit_functional_diffusive(rhos, omegas, alpha, times)
    assert report.value == approx(t_final * delta ** 2 / (4 * alpha), rel=1e-3)


def test_diffusive_limit_rejects_broken_continuity():
    alpha = 4.0
    rhos, _, times = heat_pair(64, alpha, 0.05, 11)
    zeros = [GridMeasure(rhos[0].grid, np.zeros(64))] * (len(times) - 1)
    with pytest.raises(ContinuityViolationError):
        limit_functional_diffusive(rhos, zeros, alpha, times)


def test_diffusive_limit_infinite_on_vanishing_density():
    grid = TorusGrid(8)
    w = np.full(8, 1.0 / 8)
    w_zero = w.copy()
    w_zero[3] = 0.0
    rhos = [GridMeasure(grid, w_zero), GridMeasure(grid, w_zero)]
    omegas = [GridMeasure(grid, np.zeros(8))]
    report = limit_functional_diffusive(rhos, omegas, 4.0, [0.0, 0.1])
    assert report.value == math.inf


def test_continuity_residual_detects_mismatch():
    rhos, omegas, times = heat_pair(64, 4.0, 0.05, 11)
    good = continuity_residuals(rhos, omegas, times)
    assert np.max(good) <= 1e-12
    bad = continuity_residuals(rhos, [GridMeasure(rhos[0].grid,
                                                  np.zeros(64))] * 10, times)
    assert np.max(bad) > 1e-4


# --------------------------------------------------------------------------
# hyperbolic limit functional
# --------------------------------------------------------------------------

def test_hyperbolic_zero_on_wave_flow():
    grid = TorusGrid(64)
    state = make_bump(grid, PARAMS, drift_fraction=0.4)
    times = np.linspace(0.0, 0.5, 21)
    mt = MomentumTrajectory.from_wave(state.rho(), state.omega(),
                                      PARAMS.speed, times)
    res1, res2 = momentum_residuals(mt, PARAMS.speed)
    assert np.max(res1) <= 1e-12 and np.max(res2) <= 1e-12
    assert limit_functional_hyperbolic(mt, PARAMS.speed) == 0.0


def test_hyperbolic_infinite_with_switching():
    grid = TorusGrid(64)
    params = ModelParams(speed=2.0, switch_rate=0.1)
    traj = solve(make_bump(grid, params, concentration=2.0, drift_fraction=0.3),
                 SolverConfig(dt=grid.dx / params.speed, t_final=0.2))
    mt = MomentumTrajectory.from_kinetic(traj)
    assert limit_functional_hyperbolic(mt, params.speed) == math.inf


def test_hyperbolic_infinite_with_jump_noise():
    grid = TorusGrid(64)
    state = make_bump(grid, PARAMS, drift_fraction=0.4)
    times = np.linspace(0.0, 0.5, 21)
    mt = MomentumTrajectory.from_wave(state.rho(), state.omega(),
                                      PARAMS.speed, times)
    noisy = [GridMeasure(grid, j.weights + 1e-3) for j in mt.jump_avg]
    mt = dataclasses.replace(mt, jump_avg=noisy)
    assert limit_functional_hyperbolic(mt, PARAMS.speed) == math.inf


# --------------------------------------------------------------------------
# structural blocks
# --------------------------------------------------------------------------

def test_pregeneric_uniform_reference():
    grid = TorusGrid(32)
    rho = GridMeasure(grid, np.full(32, 1.0 / 32))
    omega = GridMeasure(grid, np.zeros(32))
    blocks = pregeneric_blocks(rho, omega, PARAMS)
    assert blocks.entropy == 0.0
    assert blocks.orthogonality == approx(0.0, abs=1e-16)
    np.testing.assert_array_equal(blocks.b1[0].weights, omega.weights)
    np.testing.assert_allclose(blocks.b2[0].weights,
                               PARAMS.speed ** 2 * rho.weights)


def smooth_positive_pair(n):
    grid = TorusGrid(n)
    x = grid.centers()
    rho_w = np.exp(0.05 * np.cos(2 * np.pi * x) + 0.03 * np.sin(4 * np.pi * x))
    rho_w /= rho_w.sum()
    om_w = 0.05 * PARAMS.speed * rho_w * np.sin(2 * np.pi * x + 0.7)
    return GridMeasure(grid, rho_w), GridMeasure(grid, om_w)


def test_pregeneric_orthogonality_defect_is_quadrature_small():
    rho, omega = smooth_positive_pair(1024)
    blocks = pregeneric_blocks(rho, omega, PARAMS)
    assert abs(blocks.orthogonality) <= 1e-8


def test_pregeneric_dissipation_potential():
    rho, omega = smooth_positive_pair(64)
    blocks = pregeneric_blocks(rho, omega, PARAMS)
    n = rho.grid.n_cells
    zero = np.zeros(n)
    assert blocks.dissipation_at(zero, zero) == 0.0
    rng = np.random.default_rng(11)
    for _ in range(100):
        xi1 = rng.standard_normal(n)
        xi2 = rng.standard_normal(n)
        assert blocks.dissipation_at(xi1, xi2) >= 0.0
        # xi2 = 0 kills the cosh - 1 factor no matter what xi1 does
        assert blocks.dissipation_at(xi1, zero) == 0.0


def test_pregeneric_dual_hamiltonian_at_zero():
    rho, omega = smooth_positive_pair(64)
    blocks = pregeneric_blocks(rho, omega, PARAMS)
    n = rho.grid.n_cells
    zero = np.zeros(n)
    assert blocks.dual_hamiltonian(zero, zero, zero, zero) == 0.0
    one = np.ones(n)
    assert blocks.dual_hamiltonian(one, zero, zero, zero) == approx(
        float(omega.weights.sum()))


def test_pregeneric_rejects_zero_cells():
    grid = TorusGrid(16)
    w = np.full(16, 1.0 / 16)
    w[5] = 0.0
    with pytest.raises(DegenerateStateError):
        pregeneric_blocks(GridMeasure(grid, w),
                          GridMeasure(grid, np.zeros(16)), PARAMS)


def test_function_bank_contents():
    grid = TorusGrid(32)
    bank = function_bank(grid)
    assert [f.name for f in bank] == ["sin_2pix", "cos_2pix", "sin_4pix"]
    rho, _ = smooth_positive_pair(32)
    full = function_bank(grid, alpha=4.0, rho_bar=rho)
    assert full[-1].name == "adaptive_log_gradient"
    assert len(full) == 4
