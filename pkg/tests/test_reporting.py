import csv
import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavefolio.backtest import PredictionSeries, fmt, read_predictions_csv, run_backtest, total_return
from wavefolio.reporting import (
    PREDICTION_COLUMNS,
    TRADING_COLUMNS,
    MetricError,
    build_bundle,
    emit_reports,
    regression_metrics,
    report_schema,
)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- regression metrics ----------------------------------------------------


def test_perfect_prediction():
    m = regression_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert (m.mse, m.mae, m.mape, m.r2) == (0.0, 0.0, 0.0, 1.0)


def test_mean_predictor_has_zero_r2():
    y = np.array([1.0, 4.0, 7.0])
    assert regression_metrics(np.full(3, y.mean()), y).r2 == 0.0


def test_two_point_example():
    m = regression_metrics([110.0, 180.0], [100.0, 200.0])
    assert m.mse == pytest.approx(250.0, abs=1e-12)
    assert m.mae == pytest.approx(15.0, abs=1e-12)
    assert m.mape == pytest.approx(0.10, abs=1e-12)
    assert m.r2 == pytest.approx(0.9, abs=1e-12)


def test_metric_errors():
    with pytest.raises(MetricError, match="zero"):
        regression_metrics([1.0, 2.0], [0.0, 2.0])
    with pytest.raises(MetricError, match="constant"):
        regression_metrics([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(MetricError):
        regression_metrics([1.0], [1.0, 2.0])


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(1, 100), st.floats(1, 100)), min_size=2, max_size=10), st.floats(0.1, 100))
def test_scale_behaviour(pairs, k):
    y = np.array([p[0] for p in pairs])
    yhat = np.array([p[1] for p in pairs])
    if np.ptp(y) < 1e-6:
        return
    a = regression_metrics(yhat, y)
    b = regression_metrics(k * yhat, k * y)
    assert b.mape == pytest.approx(a.mape, rel=1e-9, abs=1e-12)
    assert b.r2 == pytest.approx(a.r2, rel=1e-9, abs=1e-9)
    assert b.mse == pytest.approx(k * k * a.mse, rel=1e-9, abs=1e-12)
    assert b.mae == pytest.approx(k * a.mae, rel=1e-9, abs=1e-12)


# --- report files ----------------------------------------------------------


def _bundle():
    rng = np.random.default_rng(0)
    series = {}
    dates = np.datetime64("2021-10-01") + np.arange(30)
    for t in ("AAA", "BBB", "CCC"):
        prices = np.round(50 * np.cumprod(1 + rng.normal(0, 0.01, 31)), 4)
        preds = np.round(prices[:-1] * (1 + rng.normal(0, 0.005, 30)), 4)
        series[t] = PredictionSeries(t, dates, prices[1:], preds, prices[:-1])
    return build_bundle("Algo", series, run_backtest(series), {"seed": 0})


def test_empty_bundle_writes_header_only(tmp_path):
    emit_reports(build_bundle("Algo", {}, None), tmp_path)
    assert (tmp_path / "trading_metrics.csv").read_text() == ",".join(TRADING_COLUMNS) + "\n"
    assert (tmp_path / "prediction_metrics.csv").read_text() == ",".join(PREDICTION_COLUMNS) + "\n"
    jsonschema.validate(json.loads((tmp_path / "report.json").read_text()), report_schema())


def test_golden_headers_and_rows(tmp_path):
    emit_reports(_bundle(), tmp_path)
    assert (tmp_path / "trading_metrics.csv").read_text().splitlines()[0] == \
        "algorithm,asset,annualized_return,sharpe,max_drawdown"
    assert (tmp_path / "prediction_metrics.csv").read_text().splitlines()[0] == \
        "algorithm,asset,mse_raw_price,mae_raw_price,mape,r2"
    assert (tmp_path / "predictions_AAA.csv").read_text().splitlines()[0] == "date,true,predicted,prev_true,signal"
    header = (tmp_path / "equity_curve.csv").read_text().splitlines()[0].split(",")
    assert header[:5] == ["date", "portfolio_return", "portfolio_equity", "bh_portfolio_return", "bh_portfolio_equity"]
    assets = [r["asset"] for r in _rows(tmp_path / "trading_metrics.csv")]
    assert assets == ["AAA", "BBB", "CCC", "Portfolio", "B&H Portfolio", "B&H AAA", "B&H BBB", "B&H CCC"]
    algos = [r["algorithm"] for r in _rows(tmp_path / "trading_metrics.csv")]
    assert algos == ["Algo"] * 4 + ["B&H"] * 4
    assert not list(tmp_path.glob("*.partial"))


def test_report_json_validates(tmp_path):
    emit_reports(_bundle(), tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(doc, report_schema())
    assert doc["metadata"] == {"seed": 0}
    assert set(doc["trading"]["per_ticker"]) == {"AAA", "BBB", "CCC"}


def test_schema_rejects_missing_block(tmp_path):
    emit_reports(_bundle(), tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    del doc["trading"]["portfolio"]["sharpe"]
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(doc, report_schema())


def test_metrics_recompute_from_emitted_files(tmp_path):
    bundle = _bundle()
    emit_reports(bundle, tmp_path)
    table = {r["asset"]: r for r in _rows(tmp_path / "prediction_metrics.csv")}
    for t in bundle.predictions:
        s = read_predictions_csv(tmp_path / f"predictions_{t}.csv", t)
        m = regression_metrics(s.predicted, s.true)
        for col, val in (("mse_raw_price", m.mse), ("mae_raw_price", m.mae), ("mape", m.mape), ("r2", m.r2)):
            assert float(table[t][col]) == pytest.approx(val, rel=1e-9, abs=1e-12)
    equity = _rows(tmp_path / "equity_curve.csv")
    daily = [float(r["portfolio_return"]) for r in equity]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert total_return(daily) == pytest.approx(doc["trading"]["portfolio"]["total_return"], abs=1e-9)
    assert total_return(doc["trading"]["portfolio"]["daily_returns"]) == \
        pytest.approx(doc["trading"]["portfolio"]["total_return"], abs=1e-12)


def test_csv_numbers_roundtrip(tmp_path):
    emit_reports(_bundle(), tmp_path)
    for name in ("trading_metrics.csv", "prediction_metrics.csv", "equity_curve.csv"):
        for row in _rows(tmp_path / name):
            for key, value in row.items():
                if key in ("algorithm", "asset", "date") or value == "":
                    continue
                assert fmt(float(value)) == value
