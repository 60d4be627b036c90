"""Flat JSON run configuration.

Every key is optional except ``tickers``. Relative paths resolve against the
directory holding the config file.

==================  ========================  ==========================================
key                 default                   meaning
==================  ========================  ==========================================
tickers             (required)                list of ticker symbols
data_dir            "data"                    directory of per-ticker CSVs
csv_pattern         "{ticker}.csv"            file name pattern inside data_dir
split_ratio         0.8                       chronological train fraction
out_dir             "out"                     models/, predictions/, report/ go here
algorithm           "WTConv-Attention-LSTM"   label used in report tables
risk_free_daily     0.0                       daily risk-free rate for Sharpe
periods_per_year    252                       annualization for return and Sharpe
tie_rule            "carry"                   indicator tie handling (only "carry")
jobs                1                         parallel per-ticker jobs
seed                0                         base seed; per-ticker streams derive from it
(model keys)        see ModelConfig           window, hidden, wavelet, wavelet_levels,
                                              wavelet_mode, attention_norm_axis,
                                              use_wtconv, use_attention, epochs,
                                              batch_size, lr, beta1, beta2, adam_eps,
                                              lr_decay, lr_decay_every, forget_bias,
                                              kernel_noise
==================  ========================  ==========================================
"""
from __future__ import annotations

import dataclasses
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .model import ModelConfig


class ConfigError(ValueError):
    pass


_MODEL_KEYS = tuple(f.name for f in dataclasses.fields(ModelConfig) if f.name not in ("channels", "seed"))


@dataclass
class RunConfig:
    tickers: list[str]
    data_dir: str = "data"
    csv_pattern: str = "{ticker}.csv"
    split_ratio: float = 0.8
    out_dir: str = "out"
    algorithm: str = "WTConv-Attention-LSTM"
    risk_free_daily: float = 0.0
    periods_per_year: int = 252
    tie_rule: str = "carry"
    jobs: int = 1
    seed: int = 0
    model: dict[str, Any] = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.tickers or not all(isinstance(t, str) and t for t in self.tickers):
            raise ConfigError("tickers must be a non-empty list of names")
        if len(set(self.tickers)) != len(self.tickers):
            raise ConfigError("tickers must be unique")
        if not 0 < self.split_ratio < 1:
            raise ConfigError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if self.tie_rule != "carry":
            raise ConfigError(f"unsupported tie_rule {self.tie_rule!r}; only 'carry' is implemented")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.periods_per_year < 1:
            raise ConfigError("periods_per_year must be >= 1")
        try:
            self.model_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model settings: {exc}") from None

    def model_config(self) -> ModelConfig:
        return ModelConfig(seed=self.seed, **self.model)

    def csv_path(self, ticker: str) -> Path:
        return self._resolve(self.data_dir) / self.csv_pattern.format(ticker=ticker)

    @property
    def out_path(self) -> Path:
        return self._resolve(self.out_dir)

    def _resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    def ticker_rng(self, ticker: str) -> np.random.Generator:
        """Independent stream per ticker, stable across runs and job orderings."""
        return np.random.default_rng(np.random.SeedSequence([self.seed, zlib.crc32(ticker.encode())]))

    def to_flat(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name not in ("model", "base_dir")}
        d.update(self.model_config().to_dict())
        d.pop("channels")
        return d

    @classmethod
    def from_flat(cls, d: dict[str, Any], base_dir: Path = Path(".")) -> "RunConfig":
        run_keys = {f.name for f in dataclasses.fields(cls)} - {"model", "base_dir"}
        unknown = set(d) - run_keys - set(_MODEL_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if "tickers" not in d:
            raise ConfigError("config needs a 'tickers' list")
        model = {k: v for k, v in d.items() if k in _MODEL_KEYS}
        run = {k: v for k, v in d.items() if k in run_keys}
        try:
            return cls(model=model, base_dir=base_dir, **run)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    raw.update(overrides or {})
    return RunConfig.from_flat(raw, path.parent.resolve())
