import json

import numpy as np
import pytest
from pytest import approx

from kacfc import (GridMeasure, KineticState, ModelParams, TorusGrid,
                   make_bump, make_uniform)
from kacfc.particles import (
    EnsembleConfig,
    StreamLayout,
    empirical_measure,
    ensemble_run,
    sample_initial,
    simulate_particle,
)

PARAMS = ModelParams(speed=2.0, switch_rate=0.5)


def small_config(**overrides):
    kwargs = dict(n_particles=256, params=PARAMS, seed=42,
                  snapshot_times=(0.1, 0.25, 0.5), bin_cells=64)
    kwargs.update(overrides)
    return EnsembleConfig(**kwargs)


# --------------------------------------------------------------------------
# stream layout: counter-based, slice-invariant randomness
# --------------------------------------------------------------------------

def test_uniform_slices_are_consistent():
    streams = StreamLayout(seed=7)
    whole = streams.uniforms("wait", 3, 0, 100)
    parts = np.concatenate([streams.uniforms("wait", 3, 0, 37),
                            streams.uniforms("wait", 3, 37, 63)])
    np.testing.assert_array_equal(whole, parts)
    # offsets that straddle the 4-per-block boundary still line up
    np.testing.assert_array_equal(whole[5:31], streams.uniforms("wait", 3, 5, 26))


def test_purposes_and_rounds_are_decorrelated():
    streams = StreamLayout(seed=7)
    a = streams.uniforms("wait", 0, 0, 50)
    b = streams.uniforms("position", 0, 0, 50)
    c = streams.uniforms("wait", 1, 0, 50)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)
    np.testing.assert_array_equal(a, StreamLayout(seed=7).uniforms("wait", 0, 0, 50))


def test_unknown_purpose_rejected():
    with pytest.raises(KeyError):
        StreamLayout(seed=1).uniforms("velocity", 0, 0, 4)


# --------------------------------------------------------------------------
# initial sampling and single-path dynamics
# --------------------------------------------------------------------------

def test_sample_initial_respects_cell_masses():
    # all mass in one (cell, sign) slot: every draw must land there
    grid = TorusGrid(8)
    plus = np.zeros(8)
    plus[5] = 1.0
    state = KineticState(GridMeasure(grid, plus),
                         GridMeasure(grid, np.zeros(8)), PARAMS)
    x, sign = sample_initial(state, StreamLayout(seed=3), 0, 64)
    assert np.all(sign == 1.0)
    assert np.all((x >= 5 / 8) & (x < 6 / 8))


def test_pure_transport_when_rate_is_zero():
    params = ModelParams(speed=2.0, switch_rate=0.0)
    config = EnsembleConfig(n_particles=128, params=params, seed=9,
                            snapshot_times=(0.125, 0.25), bin_cells=32)
    initial = make_uniform(TorusGrid(32), params)
    result = ensemble_run(initial, config)
    x0, s0 = sample_initial(initial, StreamLayout(seed=9), 0, 128)
    for t, pos, sign in zip(result.times, result.positions, result.signs):
        np.testing.assert_allclose(
            pos, (x0 + s0 * params.speed * t) % 1.0, rtol=0, atol=1e-12)
        np.testing.assert_array_equal(sign, s0)


def test_single_path_replay_matches_ensemble():
    config = small_config(n_particles=32)
    initial = make_bump(TorusGrid(64), PARAMS, drift_fraction=0.3)
    result = ensemble_run(initial, config)
    streams = StreamLayout(seed=config.seed)
    x0, s0 = sample_initial(initial, streams, 0, 32)
    for index in (0, 7, 31):
        path = simulate_particle(x0[index], s0[index], config.snapshot_times,
                                 PARAMS, streams, index)
        got = np.array([result.positions[k][index]
                        for k in range(len(result.times))])
        np.testing.assert_allclose(path, got, rtol=0, atol=1e-12)


# --------------------------------------------------------------------------
# ensembles: determinism, chunk invariance, binning
# --------------------------------------------------------------------------

def test_ensemble_is_seed_deterministic():
    initial = make_bump(TorusGrid(64), PARAMS)
    a = ensemble_run(initial, small_config())
    b = ensemble_run(initial, small_config())
    c = ensemble_run(initial, small_config(seed=43))
    for k in range(len(a.times)):
        np.testing.assert_array_equal(a.positions[k], b.positions[k])
        np.testing.assert_array_equal(a.signs[k], b.signs[k])
    assert not np.array_equal(a.positions[0], c.positions[0])


def test_chunking_does_not_change_the_draws(monkeypatch):
    initial = make_bump(TorusGrid(64), PARAMS)
    monkeypatch.setenv("KAC_THREADS", "1")
    a = ensemble_run(initial, small_config())
    monkeypatch.setenv("KAC_THREADS", "5")  # uneven split of 256
    b = ensemble_run(initial, small_config())
    for k in range(len(a.times)):
        np.testing.assert_array_equal(a.positions[k], b.positions[k])
        np.testing.assert_array_equal(a.signs[k], b.signs[k])


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(n_particles=0)
    with pytest.raises(ValueError):
        small_config(snapshot_times=(0.2, 0.1))
    with pytest.raises(ValueError):
        small_config(snapshot_times=(-0.1, 0.2))
    with pytest.raises(ValueError):
        small_config(snapshot_times=())


def test_empirical_measure_masses():
    grid = TorusGrid(16)
    positions = np.array([0.03, 0.03, 0.51, 0.99])
    signs = np.array([1.0, -1.0, 1.0, 1.0])
    state = empirical_measure(positions, signs, grid, PARAMS)
    assert state.mass() == approx(1.0, abs=0)   # exact dyadic counts
    assert state.plus.weights[0] == approx(0.25)
    assert state.minus.weights[0] == approx(0.25)
    assert state.plus.weights[8] == approx(0.25)
    assert state.plus.weights[15] == approx(0.25)


def test_single_particle_is_an_atom():
    initial = make_bump(TorusGrid(64), PARAMS)
    result = ensemble_run(initial, small_config(n_particles=1))
    for state in result.states:
        assert state.mass() == approx(1.0, abs=0)
        rho = state.plus.weights + state.minus.weights
        assert np.max(rho) == 1.0


def test_ensemble_states_match_binned_positions():
    config = small_config()
    initial = make_bump(TorusGrid(64), PARAMS)
    result = ensemble_run(initial, config)
    grid = TorusGrid(config.bin_cells)
    for k in range(len(result.times)):
        rebuilt = empirical_measure(result.positions[k], result.signs[k],
                                    grid, PARAMS)
        np.testing.assert_array_equal(rebuilt.plus.weights,
                                      result.states[k].plus.weights)


def test_save_layout(tmp_path):
    config = small_config(n_particles=16)
    result = ensemble_run(make_bump(TorusGrid(64), PARAMS), config)
    out = tmp_path / "ens"
    result.save(str(out))
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["n_particles"] == 16
    assert meta["seed"] == config.seed
    assert [float(t) for t in meta["snapshot_times"]] == [0.1, 0.25, 0.5]
    for k in range(3):
        assert (out / f"empirical_{k:06d}.csv").exists()
