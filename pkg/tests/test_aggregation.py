from __future__ import annotations

import math

import numpy as np
import pytest

from weak_speaker.errors import ConfigurationError
from weak_speaker.training.aggregation import aggregate, cluster_posteriors

EXAMPLE = np.array([0.9, -0.2, 0.1])


def test_log_sum_exp_example_value():
    expected = 0.5 * math.log((math.exp(1.8) + math.exp(-0.4) + math.exp(0.2)) / 3)

    value = float(aggregate(EXAMPLE, "lse", 0.5))

    assert value == pytest.approx(expected, abs=1e-12)
    assert value <= 0.9
    assert value >= 0.9 - 0.5 * math.log(3)


def test_small_temperature_approaches_max():
    value = float(aggregate(EXAMPLE, "lse", 1e-4))

    assert abs(value - 0.9) <= 1e-4 * math.log(3)
    assert float(aggregate(EXAMPLE, "max")) == 0.9


@pytest.mark.parametrize("kind", ["max", "lse"])
@pytest.mark.parametrize("tau", [1e-3, 0.3, 5.0])
def test_constant_column_aggregates_to_itself(kind, tau):
    o = np.full((4, 3), -0.35)

    np.testing.assert_allclose(aggregate(o, kind, tau), -0.35, atol=1e-12)


def test_random_draws_respect_bounds_and_symmetries(rng):
    for _ in range(10_000):
        clusters = int(rng.integers(1, 9))
        o = rng.uniform(-1.0, 1.0, size=clusters)
        tau = float(10.0 ** rng.uniform(-3.0, 1.0))
        peak = o.max()

        value = float(aggregate(o, "lse", tau))
        shuffled = float(aggregate(o[rng.permutation(clusters)], "lse", tau))
        constant = float(aggregate(np.full(clusters, o[0]), "lse", tau))
        sharp = float(aggregate(o, "lse", 1e-4))

        assert -1.0 - 1e-12 <= value <= 1.0 + 1e-12
        assert peak - tau * math.log(clusters) - 1e-12 <= value <= peak + 1e-12
        assert shuffled == pytest.approx(value, abs=1e-12)
        assert constant == pytest.approx(o[0], abs=1e-12)
        assert abs(sharp - peak) <= 1e-4 * math.log(clusters) + 1e-12
        assert float(aggregate(o, "max")) == peak


@pytest.mark.parametrize(("kind", "tau"), [("max", 1.0), ("lse", 0.05), ("lse", 2.0)])
def test_raising_a_similarity_never_lowers_the_logit(kind, tau, rng):
    for _ in range(2_000):
        clusters = int(rng.integers(1, 7))
        o = rng.uniform(-1.0, 1.0, size=(clusters, 3))
        raised = o.copy()
        cluster, column = int(rng.integers(clusters)), int(rng.integers(3))
        raised[cluster, column] = rng.uniform(o[cluster, column], 1.0)

        before = aggregate(o, kind, tau)
        after = aggregate(raised, kind, tau)

        assert np.all(after >= before - 1e-12)
        np.testing.assert_array_equal(np.delete(after, column), np.delete(before, column))


def test_aggregation_ignores_cluster_order(rng):
    o = rng.uniform(-1.0, 1.0, size=(5, 4))
    shuffled = o[rng.permutation(5)]

    for kind in ("max", "lse"):
        np.testing.assert_allclose(aggregate(shuffled, kind, 0.4), aggregate(o, kind, 0.4))


def test_posteriors_sum_to_one(rng):
    o = rng.uniform(-1.0, 1.0, size=(6, 5))

    soft = cluster_posteriors(o, "lse", 0.2)
    hard = cluster_posteriors(o, "max")

    np.testing.assert_allclose(soft.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_array_equal(hard.sum(axis=0), 1.0)
    np.testing.assert_array_equal(np.argmax(hard, axis=0), np.argmax(o, axis=0))


def test_posteriors_are_the_aggregation_derivative(rng):
    o = rng.uniform(-1.0, 1.0, size=(4, 3))
    step = 1e-6
    numeric = np.zeros_like(o)
    for index in np.ndindex(o.shape):
        plus, minus = o.copy(), o.copy()
        plus[index] += step
        minus[index] -= step
        column = index[1]
        numeric[index] = (
            aggregate(plus, "lse", 0.3)[column] - aggregate(minus, "lse", 0.3)[column]
        ) / (2 * step)

    np.testing.assert_allclose(cluster_posteriors(o, "lse", 0.3), numeric, atol=1e-8)


@pytest.mark.parametrize(("kind", "tau"), [("lse", 0.0), ("lse", -1.0), ("mean", 1.0)])
def test_invalid_aggregation_is_rejected(kind, tau):
    with pytest.raises(ConfigurationError):
        aggregate(EXAMPLE, kind, tau)
