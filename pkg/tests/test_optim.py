from __future__ import annotations

import numpy as np
import pytest

from weak_speaker.errors import ConfigurationError
from weak_speaker.training.optim import OptState, sgd_step


def _params() -> dict[str, np.ndarray]:
    return {"w": np.array([1.0, -2.0, 0.5])}


def test_zero_gradient_leaves_parameters_alone():
    params = _params()

    assert sgd_step(params, {"w": np.zeros(3)}, OptState(target_lr=0.1))
    np.testing.assert_array_equal(params["w"], _params()["w"])


def test_first_and_second_steps_follow_momentum():
    params = _params()
    grad = np.array([0.2, 0.0, -1.0])
    state = OptState(target_lr=0.1, momentum=0.9)

    sgd_step(params, {"w": grad}, state)
    np.testing.assert_allclose(params["w"], _params()["w"] - 0.1 * grad)

    sgd_step(params, {"w": grad}, state)
    np.testing.assert_allclose(params["w"], _params()["w"] - 0.1 * grad - 0.19 * grad)
    assert state.step == 2


def test_non_finite_gradient_skips_the_step():
    params = _params()
    state = OptState(target_lr=0.1)

    applied = sgd_step(params, {"w": np.array([0.1, np.nan, 0.0])}, state)

    assert not applied
    assert state.skipped_steps == 1
    assert state.step == 0
    np.testing.assert_array_equal(params["w"], _params()["w"])


def test_gradient_shape_must_match():
    with pytest.raises(ValueError):
        sgd_step(_params(), {"w": np.zeros(4)}, OptState(target_lr=0.1))


def test_warmup_ramps_linearly_to_the_target():
    params = {"w": np.zeros(1)}
    state = OptState(target_lr=1.0, warmup_steps=4)
    rates = []
    for _ in range(5):
        rates.append(state.current_lr())
        sgd_step(params, {"w": np.zeros(1)}, state)

    assert rates[0] == pytest.approx(0.01)
    assert rates[2] == pytest.approx(0.505)
    assert rates[4] == pytest.approx(1.0)
    assert rates == sorted(rates)


def test_plateau_halves_the_rate_after_patience():
    state = OptState(target_lr=0.8, patience=2)

    assert not state.observe_cv(1.0)
    assert not state.observe_cv(1.2)
    assert state.observe_cv(1.1)
    assert state.current_lr() == pytest.approx(0.4)
    assert not state.observe_cv(0.9)
    assert state.current_lr() == pytest.approx(0.4)


def test_plateau_is_ignored_during_warmup():
    state = OptState(target_lr=0.8, warmup_steps=10, patience=1)

    assert not state.observe_cv(1.0)
    assert not state.observe_cv(2.0)
    assert state.lr == 0.8


def test_unit_rows_are_renormalized():
    params = {"head.weight": np.array([[1.0, 0.0], [0.0, 1.0]])}
    grads = {"head.weight": np.array([[0.0, -1.0], [3.0, 0.0]])}

    sgd_step(params, grads, OptState(target_lr=0.5), unit_rows=["head.weight"])

    np.testing.assert_allclose(np.linalg.norm(params["head.weight"], axis=1), 1.0)


def test_learning_rate_must_be_positive():
    with pytest.raises(ConfigurationError):
        OptState(target_lr=0.0)
