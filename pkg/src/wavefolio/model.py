"""LSTM, linear head and the full WTConv -> channel attention -> LSTM -> head model."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .attention import AttentionParams, channel_attention, channel_attention_backward
from .numerics import DTYPE, Parameter, ShapeError, glorot_uniform, sigmoid
from .wavelet import WTConvParams, max_level, get_bank, wtconv1d_backward, wtconv1d_forward

GATES = ("i", "f", "o", "g")
MODEL_FORMAT = "wavefolio-model"
MODEL_FORMAT_VERSION = 1


@dataclass
class ModelConfig:
    window: int = 32
    hidden: int = 64
    channels: int = 5
    wavelet: str = "haar"
    wavelet_levels: int = 1
    wavelet_mode: str = "periodization"
    attention_norm_axis: str = "channel"
    use_wtconv: bool = True
    use_attention: bool = True
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    lr_decay: float = 0.5
    lr_decay_every: int = 50
    forget_bias: float = 1.0
    kernel_noise: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("window", "hidden", "channels", "wavelet_levels", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.use_wtconv:
            deepest = max_level(self.window, get_bank(self.wavelet).length)
            if self.wavelet_levels > deepest:
                raise ValueError(f"window {self.window} supports at most {deepest} {self.wavelet} levels")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


# ---------------------------------------------------------------------------
# LSTM


@dataclass
class LstmParams:
    W: dict[str, Parameter]  # gate -> (input_dim, hidden)
    U: dict[str, Parameter]  # gate -> (hidden, hidden)
    b: dict[str, Parameter]  # gate -> (hidden,)

    def __post_init__(self) -> None:
        d, h = self.W["i"].shape
        for g in GATES:
            if self.W[g].shape != (d, h) or self.U[g].shape != (h, h) or self.b[g].shape != (h,):
                raise ShapeError(f"LSTM gate {g} has inconsistent shapes")

    @property
    def input_dim(self) -> int:
        return self.W["i"].shape[0]

    @property
    def hidden(self) -> int:
        return self.W["i"].shape[1]

    @classmethod
    def init(cls, input_dim: int, hidden: int, rng: np.random.Generator, forget_bias: float = 1.0) -> "LstmParams":
        W = {g: Parameter(glorot_uniform(rng, (input_dim, hidden), input_dim, hidden), name=f"lstm.W_{g}")
             for g in GATES}
        U = {g: Parameter(glorot_uniform(rng, (hidden, hidden), hidden, hidden), name=f"lstm.U_{g}")
             for g in GATES}
        b = {g: Parameter(np.full(hidden, forget_bias if g == "f" else 0.0), name=f"lstm.b_{g}") for g in GATES}
        return cls(W, U, b)

    def parameters(self) -> dict[str, Parameter]:
        out = {}
        for group in (self.W, self.U, self.b):
            for g in GATES:
                out[group[g].name] = group[g]
        return out

    def stacked(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gate matrices concatenated in i, f, o, g order."""
        return (np.concatenate([self.W[g].value for g in GATES], axis=1),
                np.concatenate([self.U[g].value for g in GATES], axis=1),
                np.concatenate([self.b[g].value for g in GATES]))

    def accumulate(self, dW: np.ndarray, dU: np.ndarray, db: np.ndarray) -> None:
        h = self.hidden
        for k, g in enumerate(GATES):
            sl = slice(k * h, (k + 1) * h)
            self.W[g].grad += dW[:, sl]
            self.U[g].grad += dU[:, sl]
            self.b[g].grad += db[sl]


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, batch: int, hidden: int) -> "LstmState":
        return cls(np.zeros((batch, hidden)), np.zeros((batch, hidden)))


def _cell(x, h, c, W, U, b):
    hidden = h.shape[-1]
    z = x @ W + h @ U + b
    i = sigmoid(z[:, :hidden])
    f = sigmoid(z[:, hidden:2 * hidden])
    o = sigmoid(z[:, 2 * hidden:3 * hidden])
    g = np.tanh(z[:, 3 * hidden:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, i, f, o, g, tc)


def _cell_backward(dh, dc, cache, W, U):
    x, h, c, i, f, o, g, tc = cache
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    df = dc * c
    di = dc * g
    dg = dc * i
    dc_prev = dc * f
    dz = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=1)
    return dz @ W.T, dz @ U.T, dc_prev, x.T @ dz, h.T @ dz, dz.sum(axis=0)


def lstm_cell(x_t: np.ndarray, state: LstmState, params: LstmParams) -> tuple[LstmState, tuple]:
    """One step of the six LSTM update equations. ``x_t`` is (batch, input_dim)."""
    x_t = np.atleast_2d(np.asarray(x_t, dtype=DTYPE))
    if x_t.shape[1] != params.input_dim or state.h.shape[-1] != params.hidden:
        raise ShapeError(f"lstm_cell: input {x_t.shape} / state {state.h.shape} do not fit the parameters")
    W, U, b = params.stacked()
    h, c, cache = _cell(x_t, np.atleast_2d(state.h), np.atleast_2d(state.c), W, U, b)
    return LstmState(h, c), cache


def lstm_cell_backward(dh: np.ndarray, dc: np.ndarray, cache: tuple,
                       params: LstmParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (dx_t, dh_prev, dc_prev) and accumulate parameter gradients."""
    W, U, _ = params.stacked()
    dx, dh_prev, dc_prev, dW, dU, db = _cell_backward(dh, dc, cache, W, U)
    params.accumulate(dW, dU, db)
    return dx, dh_prev, dc_prev


def lstm_sequence(x: np.ndarray, params: LstmParams) -> tuple[np.ndarray, dict]:
    """Run the cell over (batch, C, L) from a zero state; return the last hidden state (batch, H)."""
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim != 3 or x.shape[1] != params.input_dim:
        raise ShapeError(f"lstm_sequence expects (batch, {params.input_dim}, L), got {x.shape}")
    batch, _, length = x.shape
    if length == 0:
        raise ShapeError("lstm_sequence needs at least one time step")
    W, U, b = params.stacked()
    h = np.zeros((batch, params.hidden))
    c = np.zeros((batch, params.hidden))
    caches = []
    for t in range(length):
        h, c, cache = _cell(x[:, :, t], h, c, W, U, b)
        caches.append(cache)
    return h, {"caches": caches, "W": W, "U": U}


def lstm_sequence_backward(dh_last: np.ndarray, cache: dict, params: LstmParams) -> np.ndarray:
    """Backpropagation through time. Returns dx with shape (batch, C, L)."""
    caches, W, U = cache["caches"], cache["W"], cache["U"]
    batch = dh_last.shape[0]
    dx = np.zeros((batch, params.input_dim, len(caches)))
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[1])
    dh, dc = dh_last, np.zeros_like(dh_last)
    for t in reversed(range(len(caches))):
        dxt, dh, dc, gW, gU, gb = _cell_backward(dh, dc, caches[t], W, U)
        dx[:, :, t] = dxt
        dW += gW
        dU += gU
        db += gb
    params.accumulate(dW, dU, db)
    return dx


# ---------------------------------------------------------------------------
# head


@dataclass
class HeadParams:
    W_out: Parameter  # (hidden, output_dim)
    b_out: Parameter  # (output_dim,)

    @classmethod
    def init(cls, hidden: int, rng: np.random.Generator, output_dim: int = 1) -> "HeadParams":
        return cls(Parameter(glorot_uniform(rng, (hidden, output_dim), hidden, output_dim), name="head.W_out"),
                   Parameter(np.zeros(output_dim), name="head.b_out"))

    def parameters(self) -> dict[str, Parameter]:
        return {"head.W_out": self.W_out, "head.b_out": self.b_out}


def head_forward(h: np.ndarray, params: HeadParams) -> np.ndarray:
    return h @ params.W_out.value + params.b_out.value


def head_backward(dy: np.ndarray, h: np.ndarray, params: HeadParams) -> np.ndarray:
    params.W_out.grad += h.T @ dy
    params.b_out.grad += dy.sum(axis=0)
    return dy @ params.W_out.value.T


# ---------------------------------------------------------------------------
# full model


@dataclass
class ModelParameters:
    lstm: LstmParams
    head: HeadParams
    wtconv: WTConvParams | None = None
    attention: AttentionParams | None = None

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator) -> "ModelParameters":
        wtconv = attention = None
        if config.use_wtconv:
            wtconv = WTConvParams.init(config.channels, config.wavelet, config.wavelet_levels,
                                       config.wavelet_mode, rng, config.kernel_noise)
        if config.use_attention:
            attention = AttentionParams.init(config.channels, rng, config.attention_norm_axis)
        lstm = LstmParams.init(config.channels, config.hidden, rng, config.forget_bias)
        head = HeadParams.init(config.hidden, rng)
        return cls(lstm, head, wtconv, attention)

    def parameters(self) -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for part in (self.wtconv, self.attention, self.lstm, self.head):
            if part is not None:
                out.update(part.parameters())
        return out

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()


def model_forward(window: np.ndarray, params: ModelParameters) -> tuple[np.ndarray, dict]:
    """(batch, C, L) -> (batch, 1) next-step prediction."""
    x = np.asarray(window, dtype=DTYPE)
    cache: dict[str, Any] = {}
    if params.wtconv is not None:
        x, cache["wtconv"] = wtconv1d_forward(x, params.wtconv)
    if params.attention is not None:
        out, cache["attention"] = channel_attention(x, params.attention)
        x = out.Y
    h, cache["lstm"] = lstm_sequence(x, params.lstm)
    cache["h"] = h
    return head_forward(h, params.head), cache


def model_backward(dpred: np.ndarray, cache: dict, params: ModelParameters) -> np.ndarray:
    """Accumulate gradients for every parameter group; return the input gradient."""
    dh = head_backward(dpred, cache["h"], params.head)
    dx = lstm_sequence_backward(dh, cache["lstm"], params.lstm)
    if params.attention is not None:
        dx = channel_attention_backward(dx, cache["attention"], params.attention)
    if params.wtconv is not None:
        dx = wtconv1d_backward(dx, cache["wtconv"], params.wtconv)
    return dx


def predict(window: np.ndarray, params: ModelParameters, batch_size: int = 256) -> np.ndarray:
    """Forward pass in chunks; returns a flat array of predictions."""
    window = np.asarray(window, dtype=DTYPE)
    out = [model_forward(window[i:i + batch_size], params)[0][:, 0] for i in range(0, len(window), batch_size)]
    return np.concatenate(out) if out else np.zeros(0)


# ---------------------------------------------------------------------------
# serialization


@dataclass
class SavedModel:
    config: ModelConfig
    params: ModelParameters
    extra: dict[str, Any] = field(default_factory=dict)


def model_to_dict(config: ModelConfig, params: ModelParameters, extra: dict[str, Any] | None = None) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "package_version": __version__,
        "config": config.to_dict(),
        "parameters": {name: {"shape": list(p.shape), "values": p.value.ravel().tolist()}
                       for name, p in params.parameters().items()},
        "extra": extra or {},
    }


def model_from_dict(d: dict) -> SavedModel:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError(f"not a {MODEL_FORMAT} file")
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('version')!r}")
    config = ModelConfig.from_dict(d["config"])
    params = ModelParameters.init(config, np.random.default_rng(0))
    slots = params.parameters()
    stored = d["parameters"]
    if set(stored) != set(slots):
        raise ValueError(f"parameter names differ: file has {sorted(stored)}, model needs {sorted(slots)}")
    for name, p in slots.items():
        shape = tuple(stored[name]["shape"])
        if shape != p.shape:
            raise ValueError(f"{name}: stored shape {shape} != expected {p.shape}")
        p.value[...] = np.asarray(stored[name]["values"], dtype=DTYPE).reshape(shape)
    return SavedModel(config, params, d.get("extra", {}))


def dumps_model(config: ModelConfig, params: ModelParameters, extra: dict[str, Any] | None = None) -> str:
    return json.dumps(model_to_dict(config, params, extra), sort_keys=True) + "\n"


def loads_model(text: str) -> SavedModel:
    return model_from_dict(json.loads(text))
