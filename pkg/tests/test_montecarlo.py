import math

import pytest

from lifereserve import load_fixture
from lifereserve.errors import ConfigurationError
from lifereserve.model import load_contract
from lifereserve.modifications import frozen_value_functions
from lifereserve.montecarlo import (
    ADJUSTED,
    PLAIN,
    ReserveEstimate,
    compare_to_solver,
    estimate_reserve,
    format_estimate,
    path_values,
)
from lifereserve.reserve_linear import solve_thiele_markov, solve_thiele_semimarkov

from conftest import ENDOWMENT_V0, SURRENDER_V0, TERM_V0, ZERO_PAYMENTS


def test_term_insurance_estimate(term):
    est = estimate_reserve(term, PLAIN, 20_000, seed=1)
    assert est.stderr > 0
    assert compare_to_solver(est, TERM_V0).passed


def test_pure_endowment_estimate(endowment):
    assert compare_to_solver(estimate_reserve(endowment, PLAIN, 20_000, seed=2), ENDOWMENT_V0).passed


def test_surrender_estimate_uses_reserve_lookup(surrender):
    V = solve_thiele_markov(surrender, 1e-3)
    assert V.initial_value(surrender) == pytest.approx(SURRENDER_V0, abs=1e-12)
    est = estimate_reserve(surrender, PLAIN, 20_000, seed=3, reserve=V)
    assert compare_to_solver(est, SURRENDER_V0).passed


def test_disability_estimate(disability):
    V = solve_thiele_semimarkov(disability, 2e-2)
    est = estimate_reserve(disability, PLAIN, 20_000, seed=4)
    assert compare_to_solver(est, V.initial_value(disability)).passed


def test_zero_payments_exact():
    est = estimate_reserve(load_contract(ZERO_PAYMENTS), PLAIN, 100, seed=0)
    assert (est.mean, est.stderr) == (0.0, 0.0)


def test_compare_arithmetic():
    ok = compare_to_solver(ReserveEstimate(0.0824, 0.0005, 100, 0), 0.08242)
    assert ok.z == pytest.approx(0.04, abs=1e-12) and ok.passed
    bad = compare_to_solver(ReserveEstimate(0.05, 0.0005, 100, 0), 0.0824)
    assert abs(bad.z) == pytest.approx(64.8, abs=1e-9) and not bad.passed


def test_compare_degenerate_stderr():
    assert compare_to_solver(ReserveEstimate(0.5, 0.0, 100, 0), 0.5).passed
    assert not compare_to_solver(ReserveEstimate(0.5, 0.0, 100, 0), 0.5000001).passed


def test_input_validation(term, surrender):
    with pytest.raises(ConfigurationError):
        estimate_reserve(term, PLAIN, 99)
    with pytest.raises(ConfigurationError):
        estimate_reserve(term, ADJUSTED, 100)
    with pytest.raises(ConfigurationError):
        estimate_reserve(surrender, PLAIN, 100)
    with pytest.raises(ConfigurationError):
        estimate_reserve(term, "other", 100)


def test_deterministic(free_policy):
    frozen = frozen_value_functions(free_policy, 1e-2)
    a = estimate_reserve(free_policy, ADJUSTED, 500, seed=9, frozen=frozen)
    b = estimate_reserve(free_policy, ADJUSTED, 500, seed=9, frozen=frozen)
    assert a == b
    assert format_estimate(a) == format_estimate(b)


def test_workers_do_not_change_result(term):
    assert estimate_reserve(term, PLAIN, 2000, seed=5, workers=2) == estimate_reserve(term, PLAIN, 2000, seed=5)


def test_path_values_are_consistent_across_chunks(term):
    whole = path_values(term, PLAIN, 6, 0, 300)
    parts = list(path_values(term, PLAIN, 6, 0, 120)) + list(path_values(term, PLAIN, 6, 120, 300))
    assert list(whole) == parts


def test_coverage_over_fifty_seeds(term):
    hits = 0
    for seed in range(50):
        est = estimate_reserve(term, PLAIN, 10_000, seed=1000 + seed)
        hits += abs(est.mean - TERM_V0) <= 2 * est.stderr
    assert hits / 50 >= 0.90


def test_seed_independence(term):
    a = estimate_reserve(term, PLAIN, 20_000, seed=101)
    b = estimate_reserve(term, PLAIN, 20_000, seed=202)
    z = (a.mean - b.mean) / math.hypot(a.stderr, b.stderr)
    assert abs(z) <= 4
    assert a.mean != b.mean


def test_report_format(term):
    est = estimate_reserve(term, PLAIN, 100, seed=7)
    text = format_estimate(est)
    fields = dict(line.split(": ", 1) for line in text.splitlines())
    assert list(fields) == ["kind", "mean", "stderr", "n", "seed"]
    assert float(fields["mean"]) == est.mean
    assert "elapsed_seconds" in format_estimate(est, elapsed=1.25)
