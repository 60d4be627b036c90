"""Array plumbing shared by every layer: parameters, MSE, Adam and gradient checking.

All layers in this package carry hand-written backward passes. They are kept
honest by :func:`finite_diff_check`, which compares an analytic gradient with a
central finite difference coordinate by coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when array shapes violate an operation's contract."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or infinity shows up where finite values are required."""


@dataclass
class Parameter:
    value: np.ndarray
    grad: np.ndarray = field(default=None)  # type: ignore[assignment]
    name: str = ""

    def __post_init__(self) -> None:
        self.value = np.asarray(self.value, dtype=DTYPE)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        else:
            self.grad = np.asarray(self.grad, dtype=DTYPE)
        if self.grad.shape != self.value.shape:
            raise ShapeError(f"{self.name}: grad shape {self.grad.shape} != value shape {self.value.shape}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=DTYPE)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def glorot_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(DTYPE)


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=DTYPE)
    target = np.asarray(target, dtype=DTYPE)
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: pred shape {pred.shape} != target shape {target.shape}")
    n = pred.size
    if n == 0:
        raise ShapeError("mse_loss: empty input")
    diff = pred - target
    return float(np.mean(diff * diff)), (2.0 / n) * diff


# ---------------------------------------------------------------------------
# Adam


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        # lr == 0 is allowed: it makes a step the identity, which tests rely on
        if not self.lr >= 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ValueError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros_like(cls, param: Parameter) -> "AdamState":
        return cls(np.zeros_like(param.value), np.zeros_like(param.value), 0)


def adam_step(param: Parameter, state: AdamState, hyper: AdamHyper) -> None:
    """One bias-corrected Adam update, applied in place to ``param`` and ``state``."""
    g = param.grad
    if state.m.shape != param.shape or state.v.shape != param.shape:
        raise ShapeError(f"{param.name}: Adam state shape does not match parameter shape {param.shape}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteError(f"non-finite gradient in parameter {param.name or '<unnamed>'}")
    state.t += 1
    state.m *= hyper.beta1
    state.m += (1.0 - hyper.beta1) * g
    state.v *= hyper.beta2
    state.v += (1.0 - hyper.beta2) * (g * g)
    m_hat = state.m / (1.0 - hyper.beta1**state.t)
    v_hat = state.v / (1.0 - hyper.beta2**state.t)
    param.value -= hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)


@dataclass(frozen=True)
class StepDecay:
    """Multiply the learning rate by ``factor`` every ``every`` epochs."""

    factor: float = 0.5
    every: int = 50

    def __call__(self, base_lr: float, epoch: int) -> float:
        if self.every <= 0:
            return base_lr
        return base_lr * self.factor ** (epoch // self.every)


class Adam:
    """Adam over a fixed, named collection of parameters."""

    def __init__(self, params: Mapping[str, Parameter], hyper: AdamHyper = AdamHyper(),
                 schedule: StepDecay | None = None):
        self.params = dict(params)
        self.hyper = hyper
        self.schedule = schedule or StepDecay()
        self.states = {name: AdamState.zeros_like(p) for name, p in self.params.items()}
        self.lr = hyper.lr

    def set_epoch(self, epoch: int) -> None:
        self.lr = self.schedule(self.hyper.lr, epoch)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self) -> None:
        hyper = AdamHyper(self.lr, self.hyper.beta1, self.hyper.beta2, self.hyper.eps)
        for name, p in self.params.items():
            adam_step(p, self.states[name], hyper)


# ---------------------------------------------------------------------------
# gradient checking


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    a = np.abs(analytic)
    n = np.abs(numeric)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(a, n), floor)


def numeric_gradient(f: Callable[[], float], array: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``f`` with respect to ``array`` (perturbed in place)."""
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f()
        flat[i] = old - eps
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def finite_diff_errors(f: Callable[[], float], arrays: Mapping[str, np.ndarray],
                       analytic: Mapping[str, np.ndarray], eps: float = 1e-5) -> dict[str, float]:
    """Per-array max relative error between ``analytic`` gradients and central differences.

    ``f`` must be a zero-argument scalar function that reads the arrays in
    ``arrays``; they are perturbed in place and restored afterwards.
    """
    first, second = f(), f()
    if first != second:
        raise RuntimeError(f"forward is not deterministic: {first!r} != {second!r}")
    errors = {}
    for name, arr in arrays.items():
        if arr.dtype != DTYPE:
            raise TypeError(f"{name}: finite differences need float64 arrays, got {arr.dtype}")
        g = np.asarray(analytic[name], dtype=DTYPE)
        if g.shape != arr.shape:
            raise ShapeError(f"{name}: analytic gradient shape {g.shape} != array shape {arr.shape}")
        num = numeric_gradient(f, arr, eps)
        errors[name] = float(relative_error(g, num).max()) if arr.size else 0.0
    return errors


def finite_diff_check(f: Callable[[], float], arrays: Mapping[str, np.ndarray],
                      analytic: Mapping[str, np.ndarray], eps: float = 1e-5) -> float:
    """Max relative gradient error over every coordinate of every array."""
    errs = finite_diff_errors(f, arrays, analytic, eps)
    return max(errs.values(), default=0.0)


def check_finite(name: str, arrays: Iterable[np.ndarray]) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"{name}: non-finite values")
