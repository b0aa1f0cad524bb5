import math

import numpy as np
import pytest

from simdistill.optim import LrSchedule, OptimizerState, init_optimizer, lr_at, sgd_step
from simdistill.tensor import DimensionError, Tensor


def one_param(value=1.0):
    p = Tensor(np.array([value]), requires_grad=True)
    return [p], init_optimizer([p])


def test_vanilla_step():
    params, state = one_param(1.0)
    sgd_step(params, [np.array([0.5])], state, lr=0.1, momentum=0.0, weight_decay=0.0)
    assert np.allclose(params[0].data, [0.95])
    assert state.step_count == 1


def test_weight_decay_adds_to_gradient():
    params, state = one_param(1.0)
    sgd_step(params, [np.array([0.5])], state, lr=0.1, momentum=0.0, weight_decay=0.1)
    assert np.allclose(params[0].data, [0.94])


def test_two_momentum_steps():
    params, state = one_param(1.0)
    g = np.array([0.5])
    sgd_step(params, [g], state, lr=0.1, momentum=0.9, weight_decay=0.0)
    sgd_step(params, [g], state, lr=0.1, momentum=0.9, weight_decay=0.0)
    # buf1 = 0.5 -> p = 0.95; buf2 = 0.95 -> p = 0.855
    assert np.allclose(params[0].data, [0.855])


def test_momentum_zero_equals_vanilla_gd():
    rng = np.random.default_rng(0)
    p1 = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    p2 = Tensor(p1.data.copy(), requires_grad=True)
    s1, s2 = init_optimizer([p1]), init_optimizer([p2])
    for _ in range(5):
        g = rng.normal(size=(3, 2))
        sgd_step([p1], [g], s1, lr=0.05, momentum=0.0, weight_decay=0.0)
        p2.data -= 0.05 * g
        _ = s2
    assert np.array_equal(p1.data, p2.data)


def test_none_grad_treated_as_zero():
    params, state = one_param(2.0)
    sgd_step(params, [None], state, lr=0.1, momentum=0.0, weight_decay=0.0)
    assert np.array_equal(params[0].data, [2.0])


def test_per_param_weight_decay():
    w = Tensor(np.array([1.0]), requires_grad=True)
    b = Tensor(np.array([1.0]), requires_grad=True)
    state = init_optimizer([w, b])
    sgd_step([w, b], [np.zeros(1), np.zeros(1)], state, lr=1.0, momentum=0.0, weight_decay=[0.1, 0.0])
    assert np.allclose(w.data, [0.9])
    assert np.allclose(b.data, [1.0])


def test_shape_mismatch_rejected():
    params, state = one_param()
    with pytest.raises(DimensionError):
        sgd_step(params, [np.zeros(3)], state, lr=0.1)


def test_hyperparameter_validation():
    params, state = one_param()
    with pytest.raises(ValueError):
        sgd_step(params, [np.zeros(1)], state, lr=-1.0)
    with pytest.raises(ValueError):
        sgd_step(params, [np.zeros(1)], state, lr=0.1, momentum=1.0)
    with pytest.raises(ValueError):
        sgd_step(params, [np.zeros(1)], state, lr=0.1, weight_decay=-0.5)


def test_cosine_endpoints_and_midpoint():
    sched = LrSchedule(base_lr=0.03, warmup_epochs=0, total_epochs=10)
    assert lr_at(sched, 0) == pytest.approx(0.03)
    assert lr_at(sched, 5) == pytest.approx(0.015)
    assert lr_at(sched, 10) == pytest.approx(0.0, abs=1e-18)


def test_warmup_ramp_is_linear_and_continuous():
    sched = LrSchedule(base_lr=0.1, warmup_epochs=5, total_epochs=20)
    ramp = [lr_at(sched, e) for e in range(5)]
    assert ramp == pytest.approx([0.02, 0.04, 0.06, 0.08, 0.1])
    assert lr_at(sched, 5) == pytest.approx(0.1)


def test_lr_nonnegative_everywhere():
    sched = LrSchedule(base_lr=0.03, warmup_epochs=3, total_epochs=17)
    assert all(lr_at(sched, e) >= 0.0 for e in range(18))


def test_epoch_out_of_range():
    sched = LrSchedule(base_lr=0.03, warmup_epochs=0, total_epochs=10)
    with pytest.raises(ValueError):
        lr_at(sched, 11)
    with pytest.raises(ValueError):
        lr_at(sched, -1)


def test_schedule_validation():
    with pytest.raises(ValueError):
        LrSchedule(base_lr=0.0, warmup_epochs=0, total_epochs=10)
    with pytest.raises(ValueError):
        LrSchedule(base_lr=0.1, warmup_epochs=10, total_epochs=10)
