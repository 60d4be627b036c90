"""OHLCV ingestion, chronological split, z-score scaling and sliding windows."""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import DTYPE

FEATURES = ("open", "high", "low", "close", "volume")
CLOSE = FEATURES.index("close")


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class OhlcvBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float


@dataclass
class TimeSeriesFrame:
    ticker: str
    dates: np.ndarray  # datetime64[D], strictly increasing
    values: np.ndarray  # (T, 5) in FEATURES order

    def __post_init__(self) -> None:
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.values = np.asarray(self.values, dtype=DTYPE)
        if self.values.ndim != 2 or self.values.shape[1] != len(FEATURES):
            raise DataError(f"{self.ticker}: values must be (T, {len(FEATURES)}), got {self.values.shape}")
        if len(self.dates) != len(self.values):
            raise DataError(f"{self.ticker}: {len(self.dates)} dates for {len(self.values)} rows")
        if len(self.dates) > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            bad = int(np.argmin(np.diff(self.dates) > np.timedelta64(0, "D"))) + 1
            raise DataError(f"{self.ticker}: dates not strictly increasing at row {bad + 1}")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def close(self) -> np.ndarray:
        return self.values[:, CLOSE]

    def bar(self, i: int) -> OhlcvBar:
        o, h, l, c, v = (float(x) for x in self.values[i])
        return OhlcvBar(self.dates[i].astype(dt.date), o, h, l, c, v)

    def slice(self, start: int | None = None, stop: int | None = None) -> "TimeSeriesFrame":
        return TimeSeriesFrame(self.ticker, self.dates[start:stop], self.values[start:stop])


def _parse_float(text: str, column: str, line: int, path) -> float:
    if text is None or text.strip() == "":
        raise DataError(f"{path}: line {line}: missing value in column {column!r}")
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"{path}: line {line}: non-numeric {column} value {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"{path}: line {line}: non-finite {column} value {text!r}")
    return value


def load_ohlcv_csv(path: str | Path, ticker: str | None = None) -> TimeSeriesFrame:
    """Read ``date,open,high,low,close,volume`` with ISO-8601 dates; extra columns are ignored."""
    path = Path(path)
    ticker = ticker or path.stem
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file, header row expected")
        header = [h.strip().lower() for h in reader.fieldnames]
        reader.fieldnames = header
        for col in ("date",) + FEATURES:
            if col not in header:
                raise DataError(f"{path}: missing column {col!r}")
        dates: list[dt.date] = []
        rows: list[list[float]] = []
        for row in reader:
            line = reader.line_num
            raw_date = (row["date"] or "").strip()
            try:
                date = dt.date.fromisoformat(raw_date)
            except ValueError:
                raise DataError(f"{path}: line {line}: bad date {raw_date!r}") from None
            vals = [_parse_float(row[c], c, line, path) for c in FEATURES]
            o, h, l, c, v = vals
            if min(o, h, l, c) <= 0:
                raise DataError(f"{path}: line {line}: prices must be positive")
            if v < 0:
                raise DataError(f"{path}: line {line}: negative volume")
            if not (l <= min(o, c) and max(o, c) <= h):
                raise DataError(f"{path}: line {line}: bar violates low <= open/close <= high")
            if dates and date <= dates[-1]:
                raise DataError(f"{path}: line {line}: date {date} does not follow {dates[-1]}")
            dates.append(date)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return TimeSeriesFrame(ticker, np.array(dates, dtype="datetime64[D]"), np.array(rows))


def write_ohlcv_csv(frame: TimeSeriesFrame, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("date",) + FEATURES)
        for d, row in zip(frame.dates, frame.values):
            w.writerow([str(d)] + [repr(float(v)) for v in row])


def train_test_split(frame: TimeSeriesFrame, ratio: float = 0.8) -> tuple[TimeSeriesFrame, TimeSeriesFrame]:
    """Chronological cut at floor(ratio * T); no shuffling."""
    if not 0 < ratio < 1:
        raise DataError(f"split ratio must lie in (0, 1), got {ratio}")
    cut = math.floor(ratio * len(frame))
    if cut == 0 or cut == len(frame):
        raise DataError(f"{frame.ticker}: ratio {ratio} on {len(frame)} bars leaves an empty side")
    return frame.slice(0, cut), frame.slice(cut, None)


@dataclass
class FeatureScaler:
    mean: np.ndarray
    std: np.ndarray
    fit_start: str = ""
    fit_end: str = ""
    fit_rows: int = 0

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=DTYPE) - self.mean) / self.std

    def invert(self, scaled: np.ndarray) -> np.ndarray:
        return np.asarray(scaled, dtype=DTYPE) * self.std + self.mean

    def apply_close(self, close: np.ndarray) -> np.ndarray:
        return (np.asarray(close, dtype=DTYPE) - self.mean[CLOSE]) / self.std[CLOSE]

    def invert_close(self, scaled: np.ndarray) -> np.ndarray:
        return np.asarray(scaled, dtype=DTYPE) * self.std[CLOSE] + self.mean[CLOSE]

    def to_dict(self) -> dict:
        return {"features": list(FEATURES), "mean": self.mean.tolist(), "std": self.std.tolist(),
                "fit_start": self.fit_start, "fit_end": self.fit_end, "fit_rows": self.fit_rows}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        if list(d["features"]) != list(FEATURES):
            raise DataError(f"scaler features {d['features']} do not match {list(FEATURES)}")
        return cls(np.asarray(d["mean"], dtype=DTYPE), np.asarray(d["std"], dtype=DTYPE),
                   d.get("fit_start", ""), d.get("fit_end", ""), d.get("fit_rows", 0))


def fit_scaler(train: TimeSeriesFrame) -> FeatureScaler:
    """Per-feature mean and population std over the training rows only."""
    if len(train) == 0:
        raise DataError("cannot fit a scaler on an empty frame")
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    flat = [FEATURES[i] for i in np.flatnonzero(~(std > 0))]
    if flat:
        raise DataError(f"{train.ticker}: zero-variance feature(s) in training data: {', '.join(flat)}")
    return FeatureScaler(mean, std, str(train.dates[0]), str(train.dates[-1]), len(train))


@dataclass
class WindowedDataset:
    inputs: np.ndarray  # (samples, 5, L), scaled
    targets: np.ndarray  # (samples,), scaled next-bar close
    target_dates: np.ndarray  # datetime64[D]
    target_close: np.ndarray  # raw close at the target bar
    prev_close: np.ndarray  # raw close of the last bar inside each window

    def __len__(self) -> int:
        return len(self.targets)


def make_windows(frame: TimeSeriesFrame, scaler: FeatureScaler, window: int) -> WindowedDataset:
    """Sample i holds scaled bars [i, i + window); its target is the scaled close of bar i + window."""
    n = len(frame)
    if window < 1:
        raise DataError(f"window must be positive, got {window}")
    if n <= window:
        raise DataError(f"{frame.ticker}: {n} bars is too short for window {window}")
    scaled = scaler.apply(frame.values)
    idx = np.arange(n - window)[:, None] + np.arange(window)[None, :]
    inputs = np.ascontiguousarray(scaled[idx].transpose(0, 2, 1))
    close = frame.close
    return WindowedDataset(inputs, scaled[window:, CLOSE].copy(), frame.dates[window:].copy(),
                           close[window:].copy(), close[window - 1:-1].copy())


def concat_frames(first: TimeSeriesFrame, second: TimeSeriesFrame) -> TimeSeriesFrame:
    if first.ticker != second.ticker:
        raise DataError(f"cannot join {first.ticker} and {second.ticker}")
    return TimeSeriesFrame(first.ticker, np.concatenate([first.dates, second.dates]),
                           np.concatenate([first.values, second.values]))


def holdout_windows(train: TimeSeriesFrame, test: TimeSeriesFrame, scaler: FeatureScaler,
                    window: int) -> WindowedDataset:
    """One window per test bar, warm-started with the last ``window`` training bars."""
    if len(train) < window:
        raise DataError(f"{train.ticker}: need {window} training bars to warm-start, have {len(train)}")
    return make_windows(concat_frames(train.slice(len(train) - window), test), scaler, window)


# ---------------------------------------------------------------------------
# synthetic data


def _bars_from_close(close: np.ndarray, rng: np.random.Generator, wiggle: float) -> np.ndarray:
    n = len(close)
    open_ = np.concatenate([[close[0]], close[:-1]]) * (1 + rng.normal(0, wiggle, n))
    high = np.maximum(open_, close) * (1 + np.abs(rng.normal(0, wiggle, n)))
    low = np.minimum(open_, close) * (1 - np.abs(rng.normal(0, wiggle, n)))
    volume = np.round(rng.lognormal(13, 0.3, n))
    return np.column_stack([open_, high, low, close, volume])


def _business_days(start: str, n: int) -> np.ndarray:
    return np.busday_offset(np.datetime64(start, "D"), np.arange(n), roll="forward")


def noisy_sine_frame(n: int = 2000, seed: int = 0, ticker: str = "SINE", level: float = 100.0,
                     amplitude: float = 10.0, period: float = 50.0, noise: float = 1.0,
                     start: str = "2013-10-01") -> TimeSeriesFrame:
    """Sine-wave close with i.i.d. Gaussian noise, wrapped into consistent OHLCV bars."""
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    close = level + amplitude * np.sin(2 * np.pi * t / period) + rng.normal(0, noise, n)
    return TimeSeriesFrame(ticker, _business_days(start, n), _bars_from_close(close, rng, 0.002))


def random_walk_frame(n: int = 500, seed: int = 0, ticker: str = "RW", start_price: float = 100.0,
                      drift: float = 2e-4, vol: float = 0.015, start: str = "2013-10-01") -> TimeSeriesFrame:
    """Geometric random walk close wrapped into consistent OHLCV bars."""
    rng = np.random.default_rng(seed)
    close = start_price * np.exp(np.cumsum(rng.normal(drift, vol, n)))
    return TimeSeriesFrame(ticker, _business_days(start, n), _bars_from_close(close, rng, 0.003))
