"""Differential-evolution and random-search optimizer behavior."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tunelab.optim import DEConfig, de_minimize, random_minimize


def sphere(x):
    return float(np.sum(x * x))


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_de_converges_on_sphere(seed):
    result = de_minimize(sphere, [-5] * 3, [5] * 3, DEConfig(max_evals=2000, seed=seed))
    assert result.y_best < 1e-5
    assert np.all(np.abs(result.x_best) < 0.1)


def test_de_converges_on_rosenbrock():
    def rosenbrock(x):
        return float(sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))

    result = de_minimize(rosenbrock, [-2] * 2, [2] * 2, DEConfig(max_evals=4000, seed=0))
    assert result.y_best < 1e-6


def test_de_spends_exactly_the_budget():
    calls = []

    def counted(x):
        calls.append(x.copy())
        return sphere(x)

    # budget is not a multiple of the population size (10 here), so the
    # final generation is cut short mid-loop
    result = de_minimize(counted, [-1] * 3, [1] * 3, DEConfig(max_evals=53, seed=7))
    assert result.evals_used == 53
    assert len(calls) == 53


def test_de_budget_below_population_raises():
    with pytest.raises(ValueError, match="population"):
        de_minimize(sphere, [0, 0], [1, 1], DEConfig(max_evals=5, population_size=8))


def test_de_is_deterministic_per_seed():
    trace_a, trace_b = [], []

    def make(trace):
        def f(x):
            trace.append(tuple(x))
            return sphere(x)

        return f

    cfg = DEConfig(max_evals=120, seed=42)
    a = de_minimize(make(trace_a), [-3] * 2, [3] * 2, cfg)
    b = de_minimize(make(trace_b), [-3] * 2, [3] * 2, cfg)
    assert trace_a == trace_b
    assert a.y_best == b.y_best
    np.testing.assert_array_equal(a.x_best, b.x_best)


def test_de_incumbent_never_worsens():
    best_series = []
    best = [math.inf]

    def tracked(x):
        y = sphere(x)
        best[0] = min(best[0], y)
        best_series.append(best[0])
        return y

    de_minimize(tracked, [-4] * 2, [4] * 2, DEConfig(max_evals=300, seed=1))
    assert all(b <= a for a, b in zip(best_series, best_series[1:]))


def test_de_treats_nonfinite_as_infinity():
    def half_nan(x):
        return float("nan") if x[0] < 0 else sphere(x)

    result = de_minimize(half_nan, [-5, -5], [5, 5], DEConfig(max_evals=400, seed=3))
    assert math.isfinite(result.y_best)
    assert result.x_best[0] >= 0


def test_de_everything_evaluated_stays_in_bounds():
    seen = []

    def recording(x):
        seen.append(x.copy())
        return sphere(x)

    de_minimize(recording, [1, 1], [2, 3], DEConfig(max_evals=200, seed=5))
    arr = np.array(seen)
    assert arr[:, 0].min() >= 1 and arr[:, 0].max() <= 2
    assert arr[:, 1].min() >= 1 and arr[:, 1].max() <= 3


def test_population_resolution_rule():
    assert DEConfig(max_evals=100).resolve_population(3) == 20
    assert DEConfig(max_evals=1000).resolve_population(2) == 20
    assert DEConfig(max_evals=16).resolve_population(50) == 4
    assert DEConfig(max_evals=100, population_size=12).resolve_population(3) == 12


def test_config_validation():
    with pytest.raises(ValueError):
        DEConfig(max_evals=0)
    with pytest.raises(ValueError):
        DEConfig(max_evals=10, population_size=3)
    with pytest.raises(ValueError):
        DEConfig(max_evals=10, f_scale=0.0)
    with pytest.raises(ValueError):
        DEConfig(max_evals=10, f_scale=2.5)
    with pytest.raises(ValueError):
        DEConfig(max_evals=10, cr=1.5)


def test_bounds_validation():
    cfg = DEConfig(max_evals=50)
    with pytest.raises(ValueError):
        de_minimize(sphere, [1, 1], [0, 2], cfg)
    with pytest.raises(ValueError):
        de_minimize(sphere, [0, float("inf")], [1, 2], cfg)
    with pytest.raises(ValueError):
        de_minimize(sphere, [], [], cfg)
    with pytest.raises(ValueError):
        de_minimize(sphere, [0], [1, 2], cfg)


def test_random_minimize_tracks_true_minimum_of_samples():
    seen = []

    def recording(x):
        seen.append((tuple(x), sphere(x)))
        return sphere(x)

    result = random_minimize(recording, [-2] * 2, [2] * 2, max_evals=64, seed=8)
    assert result.evals_used == 64 and len(seen) == 64
    ys = [y for _, y in seen]
    assert result.y_best == min(ys)
    assert tuple(result.x_best) == seen[int(np.argmin(ys))][0]


def test_random_minimize_determinism_and_validation():
    a = random_minimize(sphere, [0], [1], max_evals=10, seed=2)
    b = random_minimize(sphere, [0], [1], max_evals=10, seed=2)
    assert a.y_best == b.y_best
    with pytest.raises(ValueError):
        random_minimize(sphere, [0], [1], max_evals=0, seed=2)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), budget=st.integers(20, 200))
def test_de_result_is_best_value_seen(seed, budget):
    seen = []

    def recording(x):
        y = sphere(x)
        seen.append(y)
        return y

    result = de_minimize(recording, [-3] * 2, [3] * 2, DEConfig(max_evals=budget, seed=seed))
    assert result.y_best == min(seen)
    assert result.evals_used == budget
