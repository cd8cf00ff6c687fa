import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lifereserve import FIXTURES, load_fixture
from lifereserve.errors import SimulationError
from lifereserve.model import load_contract
from lifereserve.simulate import (
    MODE_JUMP,
    STATE_JUMP,
    Event,
    Path,
    compensated_martingales,
    dump_paths,
    integrate_on_segment,
    martingale_diagnostics,
    simulate_path,
    simulate_paths,
    transition_pairs,
)

from conftest import DEATH_PROBABILITY, NO_JUMPS

seeds = st.integers(min_value=0, max_value=2**64 - 1)


def two_state(rate: float, horizon: float = 10.0):
    return load_contract(
        f"""
horizon: {horizon}
states: {{labels: [alive, dead]}}
intensities: [{{from_state: alive, to_state: dead, value: {rate}}}]
discount: 0.0
"""
    )


@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_zero_intensity_gives_no_events(seed):
    assert simulate_path(load_contract(NO_JUMPS), seed).events == ()


@settings(max_examples=40, deadline=None)
@given(name=st.sampled_from(FIXTURES), seed=seeds, index=st.integers(0, 10**6))
def test_reproducible_bit_for_bit(name, seed, index):
    spec = load_fixture(name)
    assert simulate_path(spec, seed, path_index=index) == simulate_path(spec, seed, path_index=index)


@pytest.mark.parametrize("name", FIXTURES)
def test_every_path_satisfies_invariants(name):
    spec = load_fixture(name)
    for path in simulate_paths(spec, 2000, seed=11):
        path.check()
        times = [e.time for e in path.events]
        assert len(set(times)) == len(times)
        assert all(0.0 < t <= spec.horizon for t in times)
        assert not set(times) & set(spec.payments.lump_times)


def test_check_rejects_broken_paths():
    with pytest.raises(ValueError):
        Path((Event(1.0, STATE_JUMP, 0, 1), Event(1.0, MODE_JUMP, 0, 1)), 0, 0, 10.0).check()
    with pytest.raises(ValueError):
        Path((Event(1.0, STATE_JUMP, 1, 0),), 0, 0, 10.0).check()
    with pytest.raises(ValueError):
        Path((Event(11.0, STATE_JUMP, 0, 1),), 0, 0, 10.0).check()


def test_death_fraction_matches_survival_probability(term):
    n = 100_000
    deaths = sum(1 for s in range(n) if simulate_path(term, s).events)
    p = deaths / n
    se = math.sqrt(DEATH_PROBABILITY * (1 - DEATH_PROBABILITY) / n)
    assert abs(p - DEATH_PROBABILITY) <= 3 * se


def test_first_jump_time_is_exponential_ks():
    rate = 0.5
    spec = two_state(rate, horizon=80.0)  # censoring probability e^-40
    times = np.array([simulate_path(spec, 3, path_index=p).events[0].time for p in range(100_000)])
    result = stats.kstest(times, "expon", args=(0.0, 1.0 / rate))
    assert result.pvalue > 1e-3


def test_mode_jump_limit_zero_blocks_modifications(free_policy):
    for p in range(2000):
        assert not simulate_path(free_policy, 5, mode_jump_limit=0, path_index=p).mode_jumps


@settings(max_examples=30, deadline=None)
@given(limit=st.integers(0, 4), seed=seeds, index=st.integers(0, 1000))
def test_mode_jump_limit_caps_mode_jumps(switching, limit, seed, index):
    path = simulate_path(switching, seed, mode_jump_limit=limit, path_index=index)
    assert len(path.mode_jumps) <= limit


def test_rate_bound_violation_names_the_point():
    spec = load_contract(
        """
horizon: 10
states: {labels: [alive, dead]}
intensities: [{from_state: alive, to_state: dead, value: 0.5}]
discount: 0.0
rate_bound: 0.4
"""
    )
    with pytest.raises(SimulationError, match="t="):
        for p in range(50):
            simulate_path(spec, 1, path_index=p)


def test_paths_with_different_indices_differ(term):
    times = {simulate_path(term, 1, path_index=p).events for p in range(300)}
    assert len(times) > 20


def test_duration_at_time(disability):
    path = Path((Event(2.0, STATE_JUMP, 0, 1), Event(3.5, STATE_JUMP, 1, 0)), 0, 0, 10.0)
    assert path.state_at(1.0) == (0, 0, 1.0)
    assert path.state_at(2.5) == (1, 0, 0.5)
    assert path.state_at(4.0) == (0, 0, 0.5)


def test_compensator_quadrature_is_exact_for_constant_rate(term):
    pairs = transition_pairs(term)
    alive = Path((), 0, 0, 10.0)
    dead = Path((Event(4.25, STATE_JUMP, 0, 1),), 0, 0, 10.0)
    assert compensated_martingales(alive, term, pairs)[0] == pytest.approx(-0.1, abs=1e-15)
    assert compensated_martingales(dead, term, pairs)[0] == pytest.approx(1 - 0.0425, abs=1e-15)


def test_segment_integral_of_duration_exponential():
    # int_0^2 0.1 e^{-u} du with the duration clock started at 1
    value = integrate_on_segment(lambda s, u: 0.1 * np.exp(-u), 1.0, 3.0, 1.0)
    assert value == pytest.approx(0.1 * (1 - math.exp(-2.0)), rel=1e-12)


def test_martingale_mean_term_insurance(term):
    rep = martingale_diagnostics(term, 10_000, seed=2)
    stat = rep.mean_for("state", 0, 1)
    assert stat.stderr > 0
    assert abs(stat.z) <= 4


def test_disjoint_pairs_are_orthogonal(disability):
    rep = martingale_diagnostics(disability, 10_000, seed=4)
    cov = rep.covariance_for(("state", 0, 2), ("state", 1, 2))
    assert cov.stderr > 0
    assert abs(cov.z) <= 4
    assert all(abs(m.z) <= 4 for m in rep.means)


def test_zero_intensity_martingales_vanish():
    rep = martingale_diagnostics(load_contract(NO_JUMPS), 100, seed=0)
    assert all(m.mean == 0.0 for m in rep.means)


def test_martingale_diagnostics_requires_100_paths(term):
    with pytest.raises(ValueError):
        martingale_diagnostics(term, 99, 0)


def test_dump_is_deterministic_and_labelled(free_policy):
    a = dump_paths(simulate_paths(free_policy, 200, seed=7), free_policy)
    b = dump_paths(simulate_paths(free_policy, 200, seed=7), free_policy)
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "path_id,time,kind,from,to"
    kinds = {line.split(",")[2] for line in lines[1:]}
    assert kinds == {STATE_JUMP, MODE_JUMP}
    for line in lines[1:]:
        float(line.split(",")[1])
