"""Signal generation and equal-weight long-short portfolio accounting.

Everything here is frictionless: no transaction costs, slippage or borrow fees.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .fileio import atomic_write_text, csv_text
from .numerics import DTYPE

TRADING_DAYS = 252


class BacktestError(ValueError):
    pass


def fmt(x: float) -> str:
    """Decimal formatting shared by every CSV this package writes."""
    return f"{x:.12g}"


@dataclass
class PredictionSeries:
    ticker: str
    dates: np.ndarray  # datetime64[D]
    true: np.ndarray  # p_t
    predicted: np.ndarray  # p-hat_t
    prev_true: np.ndarray  # p_{t-1}

    def __post_init__(self) -> None:
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.true = np.asarray(self.true, dtype=DTYPE)
        self.predicted = np.asarray(self.predicted, dtype=DTYPE)
        self.prev_true = np.asarray(self.prev_true, dtype=DTYPE)
        n = len(self.dates)
        if not (len(self.true) == len(self.predicted) == len(self.prev_true) == n):
            raise BacktestError(f"{self.ticker}: prediction columns have different lengths")
        if n > 1 and not np.all(np.diff(self.dates) > np.timedelta64(0, "D")):
            raise BacktestError(f"{self.ticker}: prediction dates are not strictly increasing")
        for name in ("true", "predicted", "prev_true"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise BacktestError(f"{self.ticker}: non-finite values in {name}")
        if np.any(self.true <= 0) or np.any(self.prev_true <= 0):
            raise BacktestError(f"{self.ticker}: true prices must be positive")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def returns(self) -> np.ndarray:
        return self.true / self.prev_true - 1.0


# ---------------------------------------------------------------------------
# elementary metrics


def indicator_signal(predicted: float, prev_true: float, previous_signal: int | None = None) -> int:
    """+1 if the forecast is above yesterday's price, -1 if below; ties repeat the previous signal."""
    if not (math.isfinite(predicted) and math.isfinite(prev_true)):
        raise BacktestError(f"non-finite input to indicator: {predicted!r}, {prev_true!r}")
    if prev_true <= 0:
        raise BacktestError(f"previous price must be positive, got {prev_true!r}")
    if predicted > prev_true:
        return 1
    if predicted < prev_true:
        return -1
    return previous_signal if previous_signal is not None else 1


def signal_series(predicted: Sequence[float], prev_true: Sequence[float]) -> np.ndarray:
    out = np.empty(len(predicted), dtype=np.int64)
    prev = None
    for t, (p, q) in enumerate(zip(predicted, prev_true)):
        prev = out[t] = indicator_signal(float(p), float(q), prev)
    return out


def daily_portfolio_return(signals: Sequence[int], weights: Sequence[float], returns: Sequence[float]) -> float:
    s = np.asarray(signals, dtype=DTYPE)
    w = np.asarray(weights, dtype=DTYPE)
    r = np.asarray(returns, dtype=DTYPE)
    if not (s.shape == w.shape == r.shape):
        raise BacktestError(f"length mismatch: {s.shape}, {w.shape}, {r.shape}")
    if abs(w.sum() - 1.0) > 1e-12:
        raise BacktestError(f"weights must sum to 1, got {w.sum()!r}")
    return float(np.sum(s * w * r))


def total_return(daily: Sequence[float]) -> float:
    d = np.asarray(daily, dtype=DTYPE)
    if np.any(d <= -1.0):
        raise BacktestError("a daily return <= -100% wipes out the portfolio; total return undefined")
    return float(np.prod(1.0 + d) - 1.0)


def equity_curve(daily: Sequence[float]) -> np.ndarray:
    return np.cumprod(1.0 + np.asarray(daily, dtype=DTYPE))


def sharpe_ratio(daily: Sequence[float], risk_free_daily: float = 0.0,
                 annualization_factor: float = TRADING_DAYS) -> float:
    """Mean excess daily return over its sample standard deviation, scaled by sqrt(factor)."""
    excess = np.asarray(daily, dtype=DTYPE) - risk_free_daily
    if excess.size < 2:
        raise BacktestError("Sharpe ratio needs at least two returns")
    sd = excess.std(ddof=1)
    if np.ptp(excess) == 0 or sd == 0:
        raise BacktestError("Sharpe ratio undefined for zero-variance returns")
    return float(excess.mean() / sd * math.sqrt(annualization_factor))


def max_drawdown(values: Sequence[float]) -> float:
    v = np.asarray(values, dtype=DTYPE)
    if v.size == 0:
        raise BacktestError("max drawdown of an empty curve")
    if np.any(v <= 0):
        raise BacktestError("equity values must be positive")
    peak = -math.inf
    worst = 0.0
    for x in v:
        peak = max(peak, x)
        worst = min(worst, (x - peak) / peak)
    return abs(worst)


def buy_and_hold_return(p0: float, pt: float) -> float:
    if not p0 > 0:
        raise BacktestError(f"initial price must be positive, got {p0!r}")
    return (pt - p0) / p0


def annualized_return(total: float, days: int, periods_per_year: int = TRADING_DAYS) -> float:
    if days < 1:
        raise BacktestError(f"need at least one day, got {days}")
    if total <= -1:
        raise BacktestError("total return <= -100% cannot be annualized")
    return (1.0 + total) ** (periods_per_year / days) - 1.0


# ---------------------------------------------------------------------------
# reports


@dataclass
class PortfolioSpec:
    tickers: list[str]
    risk_free_daily: float = 0.0
    periods_per_year: int = TRADING_DAYS

    def __post_init__(self) -> None:
        if not self.tickers:
            raise BacktestError("portfolio needs at least one ticker")
        if len(set(self.tickers)) != len(self.tickers):
            raise BacktestError("duplicate tickers in portfolio")

    @property
    def weights(self) -> np.ndarray:
        n = len(self.tickers)
        return np.full(n, 1.0 / n)


@dataclass
class PerformanceBlock:
    name: str
    daily_returns: np.ndarray
    equity_curve: np.ndarray  # V_1..V_T, starting capital 1
    total_return: float
    annualized_return: float
    sharpe: float | None  # None when undefined (fewer than two days or zero variance)
    max_drawdown: float  # measured on [1, V_1, ..., V_T]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "total_return": self.total_return,
            "annualized_return": self.annualized_return,
            "sharpe": self.sharpe,
            "max_drawdown": self.max_drawdown,
            "daily_returns": self.daily_returns.tolist(),
            "equity_curve": self.equity_curve.tolist(),
        }


def performance_block(name: str, daily: np.ndarray, spec: PortfolioSpec, equity: np.ndarray | None = None,
                      total: float | None = None) -> PerformanceBlock:
    daily = np.asarray(daily, dtype=DTYPE)
    equity = equity_curve(daily) if equity is None else np.asarray(equity, dtype=DTYPE)
    total = total_return(daily) if total is None else total
    try:
        sharpe = sharpe_ratio(daily, spec.risk_free_daily, spec.periods_per_year)
    except BacktestError:
        sharpe = None
    return PerformanceBlock(name, daily, equity, total,
                            annualized_return(total, len(daily), spec.periods_per_year), sharpe,
                            max_drawdown(np.concatenate([[1.0], equity])))


@dataclass
class PortfolioReport:
    dates: np.ndarray
    tickers: list[str]
    weights: np.ndarray
    signals: dict[str, np.ndarray]
    portfolio: PerformanceBlock
    per_ticker: dict[str, PerformanceBlock]
    buy_and_hold: dict[str, PerformanceBlock]
    buy_and_hold_portfolio: PerformanceBlock
    conventions: dict = field(default_factory=dict)

    @property
    def daily_returns(self) -> np.ndarray:
        return self.portfolio.daily_returns

    @property
    def total_return(self) -> float:
        return self.portfolio.total_return


def _check_alignment(series: Sequence[PredictionSeries]) -> np.ndarray:
    ref = series[0]
    for s in series[1:]:
        if len(s) != len(ref) or not np.array_equal(s.dates, ref.dates):
            n = min(len(s), len(ref))
            diff = np.flatnonzero(s.dates[:n] != ref.dates[:n])
            where = diff[0] if diff.size else n
            first = s.dates[where] if where < len(s) else ref.dates[where]
            raise BacktestError(f"dates of {s.ticker} diverge from {ref.ticker} at {first} (row {where + 1})")
    return ref.dates


def run_backtest(predictions: Mapping[str, PredictionSeries] | Sequence[PredictionSeries],
                 spec: PortfolioSpec | None = None) -> PortfolioReport:
    """Daily-rebalanced equal-weight long-short backtest plus buy-and-hold benchmark."""
    if isinstance(predictions, Mapping):
        predictions = list(predictions.values())
    predictions = list(predictions)
    if not predictions:
        raise BacktestError("no prediction series")
    spec = spec or PortfolioSpec([p.ticker for p in predictions])
    by_ticker = {p.ticker: p for p in predictions}
    missing = [t for t in spec.tickers if t not in by_ticker]
    if missing:
        raise BacktestError(f"no predictions for {', '.join(missing)}")
    series = [by_ticker[t] for t in spec.tickers]
    dates = _check_alignment(series)
    if len(dates) == 0:
        raise BacktestError("prediction series are empty")

    signals = np.column_stack([signal_series(s.predicted, s.prev_true) for s in series])
    returns = np.column_stack([s.returns for s in series])
    weights = spec.weights
    daily = np.empty(len(dates))
    for t in range(len(dates)):
        # weights are rebuilt every day and must stay exactly equal
        w_t = spec.weights
        assert np.all(w_t == 1.0 / len(series))
        daily[t] = daily_portfolio_return(signals[t], w_t, returns[t])

    per_ticker = {s.ticker: performance_block(s.ticker, signals[:, i] * returns[:, i], spec)
                  for i, s in enumerate(series)}

    bh = {}
    rel = []
    for s in series:
        p0 = s.prev_true[0]
        curve = s.true / p0
        rel.append(curve)
        bh[s.ticker] = performance_block(f"B&H {s.ticker}", s.returns, spec, equity=curve,
                                         total=buy_and_hold_return(p0, s.true[-1]))
    bh_curve = np.mean(rel, axis=0)
    bh_daily = bh_curve / np.concatenate([[1.0], bh_curve[:-1]]) - 1.0
    bh_total = float(np.mean([b.total_return for b in bh.values()]))
    bh_port = performance_block("B&H Portfolio", bh_daily, spec, equity=bh_curve, total=bh_total)

    return PortfolioReport(
        dates=dates,
        tickers=list(spec.tickers),
        weights=weights,
        signals={s.ticker: signals[:, i] for i, s in enumerate(series)},
        portfolio=performance_block("Portfolio", daily, spec),
        per_ticker=per_ticker,
        buy_and_hold=bh,
        buy_and_hold_portfolio=bh_port,
        conventions={"risk_free_daily": spec.risk_free_daily, "periods_per_year": spec.periods_per_year,
                     "sharpe_std": "sample (n-1)", "tie_rule": "carry previous signal, +1 on first day",
                     "frictionless": True},
    )


# ---------------------------------------------------------------------------
# prediction files

PREDICTION_COLUMNS = ("date", "true", "predicted", "prev_true", "signal")


def predictions_csv_text(series: PredictionSeries) -> str:
    signals = signal_series(series.predicted, series.prev_true)
    rows = ([str(d), fmt(t), fmt(p), fmt(q), int(s)]
            for d, t, p, q, s in zip(series.dates, series.true, series.predicted, series.prev_true, signals))
    return csv_text(PREDICTION_COLUMNS, rows)


def write_predictions_csv(series: PredictionSeries, path: str | Path) -> Path:
    return atomic_write_text(path, predictions_csv_text(series))


def read_predictions_csv(path: str | Path, ticker: str | None = None) -> PredictionSeries:
    """Read ``date,true,predicted[,prev_true]``.

    Without ``prev_true`` the previous row's true price is used and the first
    row only seeds it, so the series starts one day later.
    """
    path = Path(path)
    ticker = ticker or path.stem.removeprefix("predictions_")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for c in ("date", "true", "predicted"):
            if c not in cols:
                raise BacktestError(f"{path}: missing column {c!r}")
        rows = list(reader)
    try:
        dates = np.array([r["date"] for r in rows], dtype="datetime64[D]")
        true = np.array([float(r["true"]) for r in rows])
        pred = np.array([float(r["predicted"]) for r in rows])
        prev = np.array([float(r["prev_true"]) for r in rows]) if "prev_true" in cols else None
    except ValueError as exc:
        raise BacktestError(f"{path}: {exc}") from None
    if prev is None:
        if len(rows) < 2:
            raise BacktestError(f"{path}: need two rows when prev_true is absent")
        return PredictionSeries(ticker, dates[1:], true[1:], pred[1:], true[:-1])
    return PredictionSeries(ticker, dates, true, pred, prev)
