import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavefolio.numerics import (
    Adam,
    AdamHyper,
    AdamState,
    NonFiniteError,
    Parameter,
    ShapeError,
    StepDecay,
    adam_step,
    finite_diff_check,
    mse_loss,
    numeric_gradient,
    sigmoid,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_mse_identity():
    x = np.array([1.0, -2.0, 3.5])
    loss, grad = mse_loss(x, x.copy())
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_mse_hand_value():
    loss, grad = mse_loss(np.array([1.0, 2.0]), np.array([0.0, 0.0]))
    assert loss == 2.5
    np.testing.assert_array_equal(grad, [1.0, 2.0])


def test_mse_gradient_matches_central_differences(rng):
    pred = rng.standard_normal(8)
    target = rng.standard_normal(8)
    _, grad = mse_loss(pred, target)
    num = numeric_gradient(lambda: mse_loss(pred, target)[0], pred, 1e-5)
    rel = np.abs(grad - num) / np.maximum(np.abs(grad), 1e-8)
    assert rel.max() < 1e-6


def test_mse_shape_mismatch():
    with pytest.raises(ShapeError):
        mse_loss(np.zeros(3), np.zeros(4))


@given(arrays(np.float64, 6, elements=finite), arrays(np.float64, 6, elements=finite))
def test_mse_nonnegative_and_zero_only_on_equality(a, b):
    loss, _ = mse_loss(a, b)
    assert loss >= 0
    if np.all(a == b):
        assert loss == 0
    if np.any(np.abs(a - b) > 1e-100):  # smaller gaps underflow when squared
        assert loss > 0


def test_sigmoid_is_stable_at_extremes():
    out = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    np.testing.assert_array_equal(out, [0.0, 0.5, 1.0])


# --- Adam ------------------------------------------------------------------


def _param(value, grad):
    return Parameter(np.array(value, dtype=float), np.array(grad, dtype=float), name="w")


def test_adam_zero_gradient_leaves_value():
    p = _param([1.0, -2.0], [0.0, 0.0])
    state = AdamState.zeros_like(p)
    adam_step(p, state, AdamHyper())
    np.testing.assert_array_equal(p.value, [1.0, -2.0])
    assert state.t == 1


def test_adam_first_step_size():
    p = _param([0.0], [0.5])
    adam_step(p, AdamState.zeros_like(p), AdamHyper(lr=1e-3))
    # at t=1 the bias-corrected moments are g and g^2 exactly
    assert p.value[0] == pytest.approx(-1e-3 * 0.5 / (0.5 + 1e-8), rel=1e-12)
    assert p.value[0] == pytest.approx(-1e-3, rel=1e-7)


def test_adam_second_step_not_larger():
    p = _param([0.0], [0.5])
    state = AdamState.zeros_like(p)
    adam_step(p, state, AdamHyper())
    first = p.value[0]
    adam_step(p, state, AdamHyper())
    second = p.value[0] - first
    assert abs(second) <= abs(first) * (1 + 1e-9)
    assert state.t == 2
    assert np.all(state.v >= 0)


@given(arrays(np.float64, 4, elements=finite), arrays(np.float64, 4, elements=finite))
def test_adam_zero_lr_is_identity(value, grad):
    p = _param(value, grad)
    adam_step(p, AdamState.zeros_like(p), AdamHyper(lr=0.0))
    np.testing.assert_array_equal(p.value, value)


def test_adam_rejects_non_finite_gradient():
    p = Parameter(np.zeros(2), np.array([1.0, np.nan]), name="lstm.W_i")
    with pytest.raises(NonFiniteError, match="lstm.W_i"):
        adam_step(p, AdamState.zeros_like(p), AdamHyper())


@pytest.mark.parametrize("kwargs", [dict(lr=-1.0), dict(beta1=1.0), dict(beta2=0.0), dict(eps=0.0)])
def test_adam_hyper_validation(kwargs):
    with pytest.raises(ValueError):
        AdamHyper(**kwargs)


def test_adam_is_deterministic(rng):
    value, grad = rng.standard_normal(5), rng.standard_normal(5)
    results = []
    for _ in range(2):
        p = _param(value, grad)
        s = AdamState.zeros_like(p)
        for _ in range(3):
            adam_step(p, s, AdamHyper())
        results.append(p.value.tobytes())
    assert results[0] == results[1]


def test_step_decay_schedule():
    sched = StepDecay(0.5, 50)
    assert sched(1e-3, 0) == 1e-3
    assert sched(1e-3, 49) == 1e-3
    assert sched(1e-3, 50) == 5e-4
    assert sched(1e-3, 100) == 2.5e-4


def test_adam_optimizer_applies_schedule():
    p = _param([0.0], [1.0])
    opt = Adam({"w": p}, AdamHyper(lr=1e-2), StepDecay(0.5, 2))
    opt.set_epoch(2)
    assert opt.lr == 5e-3
    opt.step()
    assert p.value[0] == pytest.approx(-5e-3, rel=1e-6)
    opt.zero_grad()
    assert p.grad[0] == 0.0


# --- finite differences ----------------------------------------------------


def test_finite_diff_exact_for_linear_map(rng):
    W = rng.standard_normal((3, 4))
    x = rng.standard_normal(4)
    probe = rng.standard_normal(3)

    def f():
        return float(probe @ (W @ x))

    err = finite_diff_check(f, {"W": W, "x": x}, {"W": np.outer(probe, x), "x": W.T @ probe}, eps=1e-5)
    assert err < 1e-9


def test_finite_diff_sigmoid_at_zero():
    z = np.zeros(1)
    num = numeric_gradient(lambda: float(sigmoid(z)[0]), z, 1e-5)
    assert num[0] == pytest.approx(0.25, abs=1e-10)
    assert finite_diff_check(lambda: float(sigmoid(z)[0]), {"z": z}, {"z": np.array([0.25])}) < 1e-9


def test_finite_diff_reports_wrong_gradient():
    x = np.array([1.0, 2.0])
    err = finite_diff_check(lambda: float(x @ x), {"x": x}, {"x": np.array([2.0, 5.0])})
    assert err > 0.1


def test_finite_diff_detects_non_determinism():
    x = np.array([1.0])
    calls = iter(range(100))
    with pytest.raises(RuntimeError, match="deterministic"):
        finite_diff_check(lambda: float(next(calls)), {"x": x}, {"x": np.zeros(1)})


@settings(max_examples=20)
@given(arrays(np.float64, 5, elements=st.floats(-3, 3)))
def test_finite_diff_restores_arrays(x):
    before = x.copy()
    finite_diff_check(lambda: float(np.sum(np.sin(x))), {"x": x}, {"x": np.cos(x)})
    np.testing.assert_array_equal(x, before)
