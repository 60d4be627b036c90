"""DCT-II features and the DCT channel-attention block."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import DTYPE, Parameter, ShapeError, glorot_uniform, sigmoid

LN_EPS = 1e-5
NORM_AXES = {"channel": 1, "length": -1}


def dct_ii(x: np.ndarray) -> np.ndarray:
    """Unnormalized DCT-II along the last axis, X_k = sum_n x_n cos(pi/N (n + 1/2) k).

    Computed from a length-2N FFT of the even extension [x, reversed(x)].
    """
    x = np.asarray(x, dtype=DTYPE)
    n = x.shape[-1]
    if n < 1:
        raise ShapeError("dct_ii needs at least one sample")
    ext = np.concatenate([x, x[..., ::-1]], axis=-1)
    spectrum = np.fft.fft(ext, axis=-1)[..., :n]
    twiddle = np.exp(-0.5j * np.pi * np.arange(n) / n)
    return 0.5 * np.real(spectrum * twiddle)


def dct_ii_adjoint(g: np.ndarray) -> np.ndarray:
    """Transpose of :func:`dct_ii`: y_n = sum_k g_k cos(pi/N (n + 1/2) k)."""
    g = np.asarray(g, dtype=DTYPE)
    n = g.shape[-1]
    z = g * np.exp(0.5j * np.pi * np.arange(n) / n)
    pad = np.concatenate([z, np.zeros_like(z)], axis=-1)
    return np.real(np.fft.ifft(pad, axis=-1)[..., :n]) * (2 * n)


@lru_cache(maxsize=32)
def _dct_matrix(n: int) -> np.ndarray:
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    return np.cos(np.pi / n * (m + 0.5) * k)


def dct_ii_naive(x: np.ndarray) -> np.ndarray:
    """O(N^2) double loop over the defining sum. Kept as the oracle for the FFT route."""
    x = np.asarray(x, dtype=DTYPE)
    n = x.shape[-1]
    flat = x.reshape(-1, n)
    out = np.zeros_like(flat)
    for row in range(flat.shape[0]):
        for k in range(n):
            acc = 0.0
            for i in range(n):
                acc += flat[row, i] * np.cos(np.pi / n * (i + 0.5) * k)
            out[row, k] = acc
    return out.reshape(x.shape)


# ---------------------------------------------------------------------------
# layer norm


def layer_norm(f: np.ndarray, gain: np.ndarray, bias: np.ndarray, axis: int = -1,
               eps: float = LN_EPS) -> tuple[np.ndarray, dict]:
    """Normalize ``f`` (batch, C, L) along ``axis``, then apply a per-channel affine."""
    f = np.asarray(f, dtype=DTYPE)
    if f.ndim != 3 or gain.shape != (f.shape[1],) or bias.shape != (f.shape[1],):
        raise ShapeError(f"layer_norm expects (batch, C, L) with C-sized affine, got {f.shape}, {gain.shape}")
    mu = f.mean(axis=axis, keepdims=True)
    centered = f - mu
    inv_std = 1.0 / np.sqrt(np.mean(centered**2, axis=axis, keepdims=True) + eps)
    xhat = centered * inv_std
    y = gain[None, :, None] * xhat + bias[None, :, None]
    return y, {"xhat": xhat, "inv_std": inv_std, "axis": axis}


def layer_norm_backward(dy: np.ndarray, cache: dict, gain: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (dx, dgain, dbias)."""
    xhat, inv_std, axis = cache["xhat"], cache["inv_std"], cache["axis"]
    dgain = np.sum(dy * xhat, axis=(0, 2))
    dbias = np.sum(dy, axis=(0, 2))
    dxhat = dy * gain[None, :, None]
    dx = inv_std * (dxhat - dxhat.mean(axis=axis, keepdims=True)
                    - xhat * np.mean(dxhat * xhat, axis=axis, keepdims=True))
    return dx, dgain, dbias


# ---------------------------------------------------------------------------
# channel attention


@dataclass
class AttentionParams:
    W1: Parameter  # (C, 2C)
    b1: Parameter  # (2C,)
    W2: Parameter  # (2C, C)
    b2: Parameter  # (C,)
    ln_gain: Parameter  # (C,)
    ln_bias: Parameter  # (C,)
    norm_axis: str = "channel"

    def __post_init__(self) -> None:
        c = self.W1.shape[0]
        expected = {"W1": (c, 2 * c), "b1": (2 * c,), "W2": (2 * c, c), "b2": (c,), "ln_gain": (c,), "ln_bias": (c,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"attention {name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.norm_axis not in NORM_AXES:
            raise ValueError(f"norm_axis must be one of {sorted(NORM_AXES)}, got {self.norm_axis!r}")

    @property
    def channels(self) -> int:
        return self.W1.shape[0]

    @classmethod
    def init(cls, channels: int, rng: np.random.Generator, norm_axis: str = "channel") -> "AttentionParams":
        c = channels
        return cls(
            Parameter(glorot_uniform(rng, (c, 2 * c), c, 2 * c), name="attn.W1"),
            Parameter(np.zeros(2 * c), name="attn.b1"),
            Parameter(glorot_uniform(rng, (2 * c, c), 2 * c, c), name="attn.W2"),
            Parameter(np.zeros(c), name="attn.b2"),
            Parameter(np.ones(c), name="attn.ln_gain"),
            Parameter(np.zeros(c), name="attn.ln_bias"),
            norm_axis,
        )

    def parameters(self) -> dict[str, Parameter]:
        return {p.name: p for p in (self.W1, self.b1, self.W2, self.b2, self.ln_gain, self.ln_bias)}


@dataclass
class AttentionOutput:
    Y: np.ndarray  # (batch, C, L)
    weights: np.ndarray  # (batch, C), each in (0, 1)


def channel_attention(x: np.ndarray, params: AttentionParams) -> tuple[AttentionOutput, dict]:
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim != 3 or x.shape[1] != params.channels:
        raise ShapeError(f"channel_attention expects (batch, {params.channels}, L), got {x.shape}")
    spectrum = dct_ii(x)
    normed, ln_cache = layer_norm(spectrum, params.ln_gain.value, params.ln_bias.value,
                                  axis=NORM_AXES[params.norm_axis])
    pooled = normed.mean(axis=-1)
    pre_hidden = pooled @ params.W1.value + params.b1.value
    hidden = np.maximum(pre_hidden, 0.0)
    weights = sigmoid(hidden @ params.W2.value + params.b2.value)
    y = x * weights[:, :, None]
    cache = {"x": x, "ln": ln_cache, "pooled": pooled, "pre_hidden": pre_hidden, "hidden": hidden,
             "weights": weights}
    return AttentionOutput(y, weights), cache


def channel_attention_backward(dy: np.ndarray, cache: dict, params: AttentionParams) -> np.ndarray:
    x, w = cache["x"], cache["weights"]
    length = x.shape[-1]
    dx = dy * w[:, :, None]
    dlogit = np.sum(dy * x, axis=-1) * w * (1.0 - w)
    params.W2.grad += cache["hidden"].T @ dlogit
    params.b2.grad += dlogit.sum(axis=0)
    dpre = (dlogit @ params.W2.value.T) * (cache["pre_hidden"] > 0)
    params.W1.grad += cache["pooled"].T @ dpre
    params.b1.grad += dpre.sum(axis=0)
    dpooled = dpre @ params.W1.value.T
    dnormed = np.repeat(dpooled[:, :, None] / length, length, axis=-1)
    dspec, dgain, dbias = layer_norm_backward(dnormed, cache["ln"], params.ln_gain.value)
    params.ln_gain.grad += dgain
    params.ln_bias.grad += dbias
    return dx + dct_ii_adjoint(dspec)
