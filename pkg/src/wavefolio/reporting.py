"""Regression accuracy metrics and the trading/prediction report files.

Files written by :func:`emit_reports`:

``trading_metrics.csv``
    algorithm, asset, annualized_return, sharpe, max_drawdown. Returns and
    drawdowns are fractions. Rows: one per ticker (fully invested in that
    ticker), ``Portfolio``, ``B&H Portfolio``, then ``B&H <ticker>`` rows.
    Buy-and-hold rows carry the algorithm label ``B&H``.
``prediction_metrics.csv``
    algorithm, asset, mse_raw_price, mae_raw_price, mape, r2. Errors are in
    raw price units (MSE in price squared).
``equity_curve.csv``
    date, then ``<block>_return`` and ``<block>_equity`` for the portfolio, the
    buy-and-hold portfolio and each ticker.
``predictions_<ticker>.csv``
    date, true, predicted, prev_true, signal.
``report.json``
    Everything above at full precision plus run metadata.

CSV numbers use 12 significant digits; JSON floats are written exactly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .backtest import PerformanceBlock, PortfolioReport, PredictionSeries, fmt, predictions_csv_text
from .fileio import atomic_write_text, csv_text
from .numerics import DTYPE

TRADING_COLUMNS = ("algorithm", "asset", "annualized_return", "sharpe", "max_drawdown")
PREDICTION_COLUMNS = ("algorithm", "asset", "mse_raw_price", "mae_raw_price", "mape", "r2")
REPORT_FORMAT = "wavefolio-report"


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class RegressionMetrics:
    mse: float
    mae: float
    mape: float
    r2: float

    def to_dict(self) -> dict[str, float]:
        return {"mse": self.mse, "mae": self.mae, "mape": self.mape, "r2": self.r2}


def regression_metrics(predicted: Sequence[float], actual: Sequence[float]) -> RegressionMetrics:
    yhat = np.asarray(predicted, dtype=DTYPE)
    y = np.asarray(actual, dtype=DTYPE)
    if yhat.shape != y.shape or yhat.ndim != 1:
        raise MetricError(f"need two equal-length 1-D series, got {yhat.shape} and {y.shape}")
    if y.size < 2:
        raise MetricError("need at least two observations")
    if np.any(y == 0):
        raise MetricError("MAPE is undefined when a target is zero")
    resid = y - yhat
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise MetricError("R^2 is undefined for a constant target")
    return RegressionMetrics(
        mse=float(np.mean(resid**2)),
        mae=float(np.mean(np.abs(resid))),
        mape=float(np.mean(np.abs(resid) / np.abs(y))),
        r2=1.0 - ss_res / ss_tot,
    )


@dataclass
class ReportBundle:
    algorithm: str
    predictions: dict[str, PredictionSeries]
    metrics: dict[str, RegressionMetrics]
    report: PortfolioReport | None
    metadata: dict[str, Any] = field(default_factory=dict)


def build_bundle(algorithm: str, predictions: Mapping[str, PredictionSeries], report: PortfolioReport | None,
                 metadata: Mapping[str, Any] | None = None) -> ReportBundle:
    metrics = {t: regression_metrics(s.predicted, s.true) for t, s in predictions.items()}
    return ReportBundle(algorithm, dict(predictions), metrics, report, dict(metadata or {}))


def _num(x: float | None) -> str:
    return "" if x is None else fmt(x)


def trading_rows(bundle: ReportBundle) -> list[list[str]]:
    rep = bundle.report
    if rep is None:
        return []
    algo = bundle.algorithm
    blocks: list[tuple[str, str, PerformanceBlock]] = [(algo, t, rep.per_ticker[t]) for t in rep.tickers]
    blocks += [(algo, "Portfolio", rep.portfolio), ("B&H", "B&H Portfolio", rep.buy_and_hold_portfolio)]
    blocks += [("B&H", f"B&H {t}", rep.buy_and_hold[t]) for t in rep.tickers]
    return [[name, asset, _num(b.annualized_return), _num(b.sharpe), _num(b.max_drawdown)]
            for name, asset, b in blocks]


def prediction_rows(bundle: ReportBundle) -> list[list[str]]:
    return [[bundle.algorithm, t, fmt(m.mse), fmt(m.mae), fmt(m.mape), fmt(m.r2)]
            for t, m in bundle.metrics.items()]


def equity_rows(rep: PortfolioReport) -> tuple[list[str], list[list[str]]]:
    blocks = [("portfolio", rep.portfolio), ("bh_portfolio", rep.buy_and_hold_portfolio)]
    blocks += [(t, rep.per_ticker[t]) for t in rep.tickers]
    header = ["date"]
    for name, _ in blocks:
        header += [f"{name}_return", f"{name}_equity"]
    rows = []
    for i, d in enumerate(rep.dates):
        row = [str(d)]
        for _, b in blocks:
            row += [fmt(b.daily_returns[i]), fmt(b.equity_curve[i])]
        rows.append(row)
    return header, rows


def _json_ready(x: Any) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_ready(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_ready(v) for v in x]
    return x


def report_dict(bundle: ReportBundle) -> dict[str, Any]:
    rep = bundle.report
    trading = None
    if rep is not None:
        trading = {
            "dates": [str(d) for d in rep.dates],
            "tickers": rep.tickers,
            "weights": rep.weights.tolist(),
            "signals": {t: s.tolist() for t, s in rep.signals.items()},
            "portfolio": rep.portfolio.to_dict(),
            "per_ticker": {t: b.to_dict() for t, b in rep.per_ticker.items()},
            "buy_and_hold": {t: b.to_dict() for t, b in rep.buy_and_hold.items()},
            "buy_and_hold_portfolio": rep.buy_and_hold_portfolio.to_dict(),
            "conventions": rep.conventions,
        }
    return _json_ready({
        "format": REPORT_FORMAT,
        "algorithm": bundle.algorithm,
        "metadata": bundle.metadata,
        "prediction_metrics": {t: m.to_dict() for t, m in bundle.metrics.items()},
        "trading": trading,
    })


def emit_reports(bundle: ReportBundle, out_dir: str | Path) -> list[Path]:
    """Write every report file into ``out_dir``; returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    written = [
        atomic_write_text(out / "trading_metrics.csv", csv_text(TRADING_COLUMNS, trading_rows(bundle))),
        atomic_write_text(out / "prediction_metrics.csv", csv_text(PREDICTION_COLUMNS, prediction_rows(bundle))),
    ]
    if bundle.report is not None:
        header, rows = equity_rows(bundle.report)
        written.append(atomic_write_text(out / "equity_curve.csv", csv_text(header, rows)))
    for t, s in bundle.predictions.items():
        written.append(atomic_write_text(out / f"predictions_{t}.csv", predictions_csv_text(s)))
    text = json.dumps(report_dict(bundle), indent=1, sort_keys=True, allow_nan=False) + "\n"
    written.append(atomic_write_text(out / "report.json", text))
    return written


def report_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("report_schema.json").read_text())
