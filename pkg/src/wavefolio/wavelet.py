"""Filter-bank DWT/IDWT and the wavelet-transform convolution layer (WTConv1d).

Transforms act on the last axis and accept any leading batch dimensions.

Two boundary modes are available:

``periodization`` (default)
    Circular filtering. For orthonormal banks the transform is an orthogonal
    matrix, so energy is conserved exactly. When a level sees an odd length the
    last sample bypasses the filters and is appended to the approximation band,
    which keeps the transform square and orthogonal.

``symmetric``
    Half-sample symmetric extension. Each level emits
    ``floor((n + F - 1) / 2)`` coefficients per band (F = filter length), so
    the transform is redundant: reconstruction is exact but energy is not
    conserved for filters longer than two taps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .numerics import DTYPE, Parameter, ShapeError

MODES = ("periodization", "symmetric")
KERNEL_SIZE = 3
_ROLES = ("dec_lo", "dec_hi", "rec_lo", "rec_hi")


class WaveletError(ValueError):
    pass


@dataclass(frozen=True)
class FilterBank:
    name: str
    dec_lo: tuple[float, ...]
    dec_hi: tuple[float, ...]
    rec_lo: tuple[float, ...]
    rec_hi: tuple[float, ...]

    def __post_init__(self) -> None:
        lengths = {len(self.dec_lo), len(self.dec_hi), len(self.rec_lo), len(self.rec_hi)}
        if len(lengths) != 1:
            raise WaveletError(f"bank {self.name!r}: all four filters must have the same length")
        if self.length % 2:
            raise WaveletError(f"bank {self.name!r}: filter length must be even, got {self.length}")

    @property
    def length(self) -> int:
        return len(self.dec_lo)

    @property
    def orthonormal(self) -> bool:
        lo = np.array(self.dec_lo)
        hi = np.array(self.dec_hi)
        return (
            np.allclose(self.dec_lo, self.rec_lo, atol=1e-12)
            and np.allclose(self.dec_hi, self.rec_hi, atol=1e-12)
            and abs(lo @ lo - 1.0) < 1e-12
            and abs(hi @ hi - 1.0) < 1e-12
        )

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.asarray(t, dtype=DTYPE) for t in (self.dec_lo, self.dec_hi, self.rec_lo, self.rec_hi))


def parse_filter_banks(text: str) -> dict[str, FilterBank]:
    """Parse the plain-text bank table (``<name> <role> <tap> <tap> ...`` per line)."""
    taps: dict[str, dict[str, tuple[float, ...]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3:
            raise WaveletError(f"line {lineno}: expected '<name> <role> <taps...>'")
        name, role = parts[0], parts[1]
        if role not in _ROLES:
            raise WaveletError(f"line {lineno}: unknown role {role!r}")
        try:
            values = tuple(float(v) for v in parts[2:])
        except ValueError as exc:
            raise WaveletError(f"line {lineno}: {exc}") from None
        taps.setdefault(name, {})[role] = values
    banks = {}
    for name, roles in taps.items():
        missing = [r for r in _ROLES if r not in roles]
        if missing:
            raise WaveletError(f"bank {name!r} is missing {', '.join(missing)}")
        banks[name] = FilterBank(name, *(roles[r] for r in _ROLES))
    return banks


def load_filter_banks(path: str | Path | None = None) -> dict[str, FilterBank]:
    if path is None:
        text = resources.files(__package__).joinpath("filters.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_filter_banks(text)


@lru_cache(maxsize=None)
def _builtin_banks() -> dict[str, FilterBank]:
    return load_filter_banks()


def get_bank(bank: str | FilterBank) -> FilterBank:
    if isinstance(bank, FilterBank):
        return bank
    banks = _builtin_banks()
    if bank not in banks:
        raise WaveletError(f"unknown wavelet {bank!r}; available: {', '.join(sorted(banks))}")
    return banks[bank]


def max_level(length: int, filter_length: int) -> int:
    if length < filter_length:
        return 0
    return int(math.floor(math.log2(length / filter_length))) + 1


def _band_length(n: int, filter_length: int, mode: str) -> tuple[int, int]:
    """(approx length, detail length) produced by one level on ``n`` samples."""
    if mode == "periodization":
        return (n + 1) // 2, n // 2
    k = (n + filter_length - 1) // 2
    return k, k


@dataclass
class WaveletCoeffs:
    """Multi-level pyramid. ``details[0]`` is the finest level, ``details[-1]`` the coarsest."""

    approx: np.ndarray
    details: list[np.ndarray]
    original_length: int
    bank: str
    mode: str = "periodization"
    level_lengths: list[int] = field(default_factory=list)

    @property
    def levels(self) -> int:
        return len(self.details)

    def bands(self) -> list[np.ndarray]:
        """Bands ordered coarse to fine: approx, coarsest detail, ..., finest detail."""
        return [self.approx, *reversed(self.details)]

    def scaled(self, alpha: float) -> "WaveletCoeffs":
        return WaveletCoeffs(alpha * self.approx, [alpha * d for d in self.details],
                             self.original_length, self.bank, self.mode, list(self.level_lengths))

    def energy(self) -> np.ndarray:
        total = np.sum(self.approx**2, axis=-1)
        for d in self.details:
            total = total + np.sum(d**2, axis=-1)
        return total


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise WaveletError(f"unknown boundary mode {mode!r}; expected one of {MODES}")


def _analysis_periodic(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[-1]
    tail = None
    if n % 2:
        x, tail = x[..., :-1], x[..., -1:]
        n -= 1
    half = n // 2
    idx = (2 * np.arange(half)[:, None] + np.arange(lo.size)[None, :]) % n
    windows = x[..., idx]
    a = windows @ lo
    d = windows @ hi
    if tail is not None:
        a = np.concatenate([a, tail], axis=-1)
    return a, d


def _synthesis_periodic(a: np.ndarray, d: np.ndarray, n: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    tail = None
    if n % 2:
        a, tail = a[..., :-1], a[..., -1:]
    m = n - (n % 2)
    out = np.zeros(a.shape[:-1] + (m,), dtype=DTYPE)
    k2 = 2 * np.arange(m // 2)
    for j in range(lo.size):
        # for fixed tap j the target indices are distinct, so fancy-index += is safe
        out[..., (k2 + j) % m] += lo[j] * a + hi[j] * d
    if tail is not None:
        out = np.concatenate([out, tail], axis=-1)
    return out


def _analysis_symmetric(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[-1]
    f = lo.size
    k = (n + f - 1) // 2
    pad = [(0, 0)] * (x.ndim - 1) + [(f - 1, 2 * k - n)]
    ext = np.pad(x, pad, mode="symmetric")
    idx = 2 * np.arange(k)[:, None] + 1 + np.arange(f)[None, :]
    windows = ext[..., idx]
    return windows @ lo, windows @ hi


def _synthesis_symmetric(a: np.ndarray, d: np.ndarray, n: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    f = lo.size
    k = a.shape[-1]
    out = np.zeros(a.shape[:-1] + (2 * k + f,), dtype=DTYPE)
    k2 = 2 * np.arange(k) + 1
    for j in range(f):
        out[..., k2 + j] += lo[j] * a + hi[j] * d
    return out[..., f - 1 : f - 1 + n]


def dwt_forward(signal: np.ndarray, bank: str | FilterBank = "haar", levels: int = 1,
                mode: str = "periodization") -> WaveletCoeffs:
    """Multi-level DWT along the last axis."""
    _check_mode(mode)
    fb = get_bank(bank)
    x = np.asarray(signal, dtype=DTYPE)
    if x.ndim == 0:
        raise ShapeError("dwt_forward needs at least one axis")
    n = x.shape[-1]
    if n < fb.length:
        raise WaveletError(f"signal length {n} is shorter than the {fb.name} filter ({fb.length} taps)")
    if levels < 1:
        raise WaveletError(f"levels must be >= 1, got {levels}")
    deepest = max_level(n, fb.length)
    if levels > deepest:
        raise WaveletError(f"{levels} levels is too deep for length {n} with {fb.name}; max is {deepest}")
    lo, hi, _, _ = fb.arrays()
    analysis = _analysis_periodic if mode == "periodization" else _analysis_symmetric
    details = []
    lengths = []
    a = x
    for _ in range(levels):
        lengths.append(a.shape[-1])
        a, d = analysis(a, lo, hi)
        details.append(d)
    return WaveletCoeffs(a, details, n, fb.name, mode, lengths)


def dwt_inverse(coeffs: WaveletCoeffs, bank: str | FilterBank | None = None) -> np.ndarray:
    """Invert :func:`dwt_forward`; output has ``coeffs.original_length`` samples."""
    fb = get_bank(bank if bank is not None else coeffs.bank)
    if fb.name != coeffs.bank:
        raise WaveletError(f"coefficients were produced by {coeffs.bank!r}, not {fb.name!r}")
    _check_mode(coeffs.mode)
    lengths = coeffs.level_lengths or _level_lengths(coeffs.original_length, fb.length, coeffs.levels, coeffs.mode)
    if len(lengths) != coeffs.levels:
        raise WaveletError("level_lengths does not match the number of detail bands")
    _, _, rlo, rhi = fb.arrays()
    synthesis = _synthesis_periodic if coeffs.mode == "periodization" else _synthesis_symmetric
    a = np.asarray(coeffs.approx, dtype=DTYPE)
    for n, d in zip(reversed(lengths), reversed(coeffs.details)):
        expect_a, expect_d = _band_length(n, fb.length, coeffs.mode)
        if a.shape[-1] != expect_a or d.shape[-1] != expect_d:
            raise WaveletError(f"band lengths ({a.shape[-1]}, {d.shape[-1]}) do not fit a level of length {n}")
        a = synthesis(a, np.asarray(d, dtype=DTYPE), n, rlo, rhi)
    return a


def _level_lengths(n: int, filter_length: int, levels: int, mode: str) -> list[int]:
    out = []
    for _ in range(levels):
        out.append(n)
        n = _band_length(n, filter_length, mode)[0]
    return out


def band_sizes(length: int, bank: str | FilterBank, levels: int, mode: str = "periodization") -> list[int]:
    """Band lengths in :meth:`WaveletCoeffs.bands` order (approx first, finest detail last)."""
    fb = get_bank(bank)
    lengths = _level_lengths(length, fb.length, levels, mode)
    details = [_band_length(n, fb.length, mode)[1] for n in lengths]
    approx = _band_length(lengths[-1], fb.length, mode)[0]
    return [approx, *reversed(details)]


@lru_cache(maxsize=64)
def transform_matrices(length: int, bank: str, levels: int, mode: str) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Dense analysis matrix A (coeffs x length), synthesis matrix S (length x coeffs), band sizes.

    Both transforms are linear, so applying them to the identity basis yields
    their matrices; the transposes then give exact backward passes.
    """
    eye = np.eye(length, dtype=DTYPE)
    coeffs = dwt_forward(eye, bank, levels, mode)
    analysis = np.concatenate(coeffs.bands(), axis=-1).T
    sizes = tuple(b.shape[-1] for b in coeffs.bands())
    n_coef = analysis.shape[0]
    basis = np.eye(n_coef, dtype=DTYPE)
    bands = np.split(basis, np.cumsum(sizes)[:-1], axis=-1)
    unit = WaveletCoeffs(bands[0], list(reversed(bands[1:])), length, get_bank(bank).name, mode,
                         coeffs.level_lengths)
    synthesis = dwt_inverse(unit).T
    analysis.setflags(write=False)
    synthesis.setflags(write=False)
    return analysis, synthesis, sizes


# ---------------------------------------------------------------------------
# WTConv1d


@dataclass
class WTConvParams:
    kernels: Parameter  # (channels, levels + 1, KERNEL_SIZE), bands coarse to fine
    gamma: Parameter  # (levels + 1,)
    bank: str = "haar"
    levels: int = 1
    mode: str = "periodization"

    def __post_init__(self) -> None:
        c, bands, k = self.kernels.shape
        if bands != self.levels + 1 or k != KERNEL_SIZE:
            raise ShapeError(f"kernels shape {self.kernels.shape} does not fit {self.levels} levels")
        if self.gamma.shape != (self.levels + 1,):
            raise ShapeError(f"gamma shape {self.gamma.shape} != ({self.levels + 1},)")

    @property
    def channels(self) -> int:
        return self.kernels.shape[0]

    @classmethod
    def init(cls, channels: int, bank: str = "haar", levels: int = 1, mode: str = "periodization",
             rng: np.random.Generator | None = None, noise: float = 0.1) -> "WTConvParams":
        kernels = np.zeros((channels, levels + 1, KERNEL_SIZE), dtype=DTYPE)
        kernels[..., KERNEL_SIZE // 2] = 1.0
        if rng is not None and noise:
            kernels += rng.uniform(-noise, noise, size=kernels.shape)
        return cls(Parameter(kernels, name="wtconv.kernels"),
                   Parameter(np.ones(levels + 1, dtype=DTYPE), name="wtconv.gamma"),
                   bank, levels, mode)

    def parameters(self) -> dict[str, Parameter]:
        return {"wtconv.kernels": self.kernels, "wtconv.gamma": self.gamma}


def depthwise_conv_same(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Cross-correlate each row of ``x`` (..., C, n) with its own 3-tap kernel ``w`` (C, 3), zero padded."""
    n = x.shape[-1]
    xp = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(1, 1)])
    out = np.zeros_like(x)
    for j in range(KERNEL_SIZE):
        out += w[:, j, None] * xp[..., j : j + n]
    return out


def _depthwise_conv_backward(dy: np.ndarray, x: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[-1]
    xp = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(1, 1)])
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    batch_axes = tuple(range(x.ndim - 2))
    for j in range(KERNEL_SIZE):
        dw[:, j] = np.sum(dy * xp[..., j : j + n], axis=batch_axes + (x.ndim - 1,))
        dxp[..., j : j + n] += w[:, j, None] * dy
    return dxp[..., 1 : 1 + n], dw


def wtconv1d_forward(x: np.ndarray, params: WTConvParams) -> tuple[np.ndarray, dict]:
    """WT -> per-band depthwise conv scaled by gamma -> IWT. ``x`` is (batch, channels, length)."""
    x = np.asarray(x, dtype=DTYPE)
    if x.ndim != 3 or x.shape[1] != params.channels:
        raise ShapeError(f"wtconv1d expects (batch, {params.channels}, length), got {x.shape}")
    analysis, synthesis, sizes = transform_matrices(x.shape[-1], params.bank, params.levels, params.mode)
    coef = x @ analysis.T
    bands = np.split(coef, np.cumsum(sizes)[:-1], axis=-1)
    conv = [depthwise_conv_same(b, params.kernels.value[:, i]) for i, b in enumerate(bands)]
    scaled = np.concatenate([params.gamma.value[i] * c for i, c in enumerate(conv)], axis=-1)
    out = scaled @ synthesis.T
    return out, {"bands": bands, "conv": conv, "sizes": sizes, "analysis": analysis, "synthesis": synthesis}


def wtconv1d_backward(dout: np.ndarray, cache: dict, params: WTConvParams) -> np.ndarray:
    """Accumulate kernel and gamma gradients into ``params``; return the input gradient."""
    dscaled = dout @ cache["synthesis"]
    sizes = cache["sizes"]
    dbands = np.split(dscaled, np.cumsum(sizes)[:-1], axis=-1)
    dcoef = []
    for i, (db, b, c) in enumerate(zip(dbands, cache["bands"], cache["conv"])):
        params.gamma.grad[i] += np.sum(db * c)
        dc = params.gamma.value[i] * db
        dxb, dw = _depthwise_conv_backward(dc, b, params.kernels.value[:, i])
        params.kernels.grad[:, i] += dw
        dcoef.append(dxb)
    return np.concatenate(dcoef, axis=-1) @ cache["analysis"]
