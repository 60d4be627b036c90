"""Command-line entry point for the forecast-and-backtest pipeline.

    wavefolio <subcommand> --config run.json [--seed N] [--out DIR] [--jobs K] [--set KEY=VALUE ...]

Subcommands: ingest-check, train, predict, backtest, report, run-all.
Exit codes: 0 success, 1 validation failure, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .backtest import (BacktestError, PortfolioSpec, PredictionSeries, fmt, read_predictions_csv, run_backtest,
                       write_predictions_csv)
from .config import ConfigError, RunConfig, load_config
from .fileio import atomic_write_text, csv_text
from .marketdata import (DataError, FeatureScaler, fit_scaler, holdout_windows, load_ohlcv_csv, make_windows,
                         train_test_split)
from .model import dumps_model, loads_model, predict
from .reporting import MetricError, build_bundle, emit_reports
from .training import train_model

log = logging.getLogger("wavefolio")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
VALIDATION_ERRORS = (ConfigError, DataError, BacktestError, MetricError, FileNotFoundError)


class CommandFailed(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _model_path(cfg: RunConfig, ticker: str) -> Path:
    return cfg.out_path / "models" / f"{ticker}.model.json"


def _prediction_path(cfg: RunConfig, ticker: str) -> Path:
    return cfg.out_path / "predictions" / f"predictions_{ticker}.csv"


def _report_dir(cfg: RunConfig) -> Path:
    return cfg.out_path / "report"


def _per_ticker(cfg: RunConfig, fn: Callable[[RunConfig, str], Any]) -> dict[str, Any]:
    """Run ``fn`` for every ticker, in parallel when ``cfg.jobs > 1``; collect all failures."""
    results: dict[str, Any] = {}
    failures: dict[str, BaseException] = {}
    if cfg.jobs > 1 and len(cfg.tickers) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = {t: pool.submit(fn, cfg, t) for t in cfg.tickers}
            for t, fut in futures.items():
                try:
                    results[t] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported per ticker below
                    failures[t] = exc
    else:
        for t in cfg.tickers:
            try:
                results[t] = fn(cfg, t)
            except Exception as exc:  # noqa: BLE001
                failures[t] = exc
    if failures:
        for t, exc in failures.items():
            log.error("%s: %s", t, exc)
        code = EXIT_INVALID if all(isinstance(e, VALIDATION_ERRORS) for e in failures.values()) else EXIT_RUNTIME
        raise CommandFailed(f"failed for {', '.join(failures)}", code)
    return results


def _load_split(cfg: RunConfig, ticker: str):
    frame = load_ohlcv_csv(cfg.csv_path(ticker), ticker)
    return train_test_split(frame, cfg.split_ratio)


# ---------------------------------------------------------------------------
# subcommands


def _check_one(cfg: RunConfig, ticker: str) -> dict[str, Any]:
    train, test = _load_split(cfg, ticker)
    window = cfg.model_config().window
    if len(train) <= window:
        raise DataError(f"{ticker}: {len(train)} training bars is too short for window {window}")
    return {"train": len(train), "test": len(test), "start": str(train.dates[0]), "end": str(test.dates[-1])}


def cmd_ingest_check(cfg: RunConfig) -> None:
    info = _per_ticker(dataclasses.replace(cfg, jobs=1), _check_one)
    for t, i in info.items():
        log.info("%s: %s .. %s, %d train / %d test bars", t, i["start"], i["end"], i["train"], i["test"])


def _train_one(cfg: RunConfig, ticker: str) -> Path:
    train, _ = _load_split(cfg, ticker)
    scaler = fit_scaler(train)
    mcfg = cfg.model_config()
    dataset = make_windows(train, scaler, mcfg.window)
    log.info("%s: training on %d windows for %d epochs", ticker, len(dataset), mcfg.epochs)
    result = train_model(dataset, mcfg, rng=cfg.ticker_rng(ticker))
    extra = {"ticker": ticker, "scaler": scaler.to_dict(), "loss_curve": result.loss_curve,
             "split_ratio": cfg.split_ratio}
    path = _model_path(cfg, ticker)
    atomic_write_text(path, dumps_model(mcfg, result.params, extra))
    atomic_write_text(path.with_name(f"{ticker}.loss.csv"),
                      csv_text(("epoch", "loss"), ([i + 1, fmt(v)] for i, v in enumerate(result.loss_curve))))
    log.info("%s: final training loss %.6g -> %s", ticker, result.loss_curve[-1], path)
    return path


def cmd_train(cfg: RunConfig) -> None:
    for t in cfg.tickers:
        if not cfg.csv_path(t).is_file():
            raise CommandFailed(f"{t}: missing data file {cfg.csv_path(t)}", EXIT_INVALID)
    (cfg.out_path / "models").mkdir(parents=True, exist_ok=True)
    _per_ticker(cfg, _train_one)


def predictions_for(cfg: RunConfig, ticker: str) -> PredictionSeries:
    path = _model_path(cfg, ticker)
    if not path.is_file():
        raise FileNotFoundError(f"{ticker}: no model file at {path}; run 'train' first")
    saved = loads_model(path.read_text())
    scaler = FeatureScaler.from_dict(saved.extra["scaler"])
    train, test = _load_split(cfg, ticker)
    data = holdout_windows(train, test, scaler, saved.config.window)
    pred = scaler.invert_close(predict(data.inputs, saved.params))
    return PredictionSeries(ticker, data.target_dates, data.target_close, pred, data.prev_close)


def _predict_one(cfg: RunConfig, ticker: str) -> Path:
    series = predictions_for(cfg, ticker)
    path = _prediction_path(cfg, ticker)
    write_predictions_csv(series, path)
    log.info("%s: %d predictions -> %s", ticker, len(series), path)
    return path


def cmd_predict(cfg: RunConfig) -> None:
    missing = [t for t in cfg.tickers if not _model_path(cfg, t).is_file()]
    if missing:
        raise CommandFailed(f"missing model files for {', '.join(missing)}; run 'train' first", EXIT_INVALID)
    (cfg.out_path / "predictions").mkdir(parents=True, exist_ok=True)
    _per_ticker(cfg, _predict_one)


def _metadata(cfg: RunConfig) -> dict[str, Any]:
    echo = cfg.to_flat()
    # where and how fast a run executes does not change its results
    echo.pop("out_dir")
    echo.pop("jobs")
    return {"package_version": __version__, "seed": cfg.seed, "config": echo,
            "frictionless": True, "price_units": "raw, as found in the input CSVs"}


def cmd_backtest(cfg: RunConfig) -> None:
    missing = [t for t in cfg.tickers if not _prediction_path(cfg, t).is_file()]
    if missing:
        raise CommandFailed(f"missing prediction files for {', '.join(missing)}; run 'predict' first",
                            EXIT_INVALID)
    series = {t: read_predictions_csv(_prediction_path(cfg, t), t) for t in cfg.tickers}
    spec = PortfolioSpec(list(cfg.tickers), cfg.risk_free_daily, cfg.periods_per_year)
    report = run_backtest(series, spec)
    bundle = build_bundle(cfg.algorithm, series, report, _metadata(cfg))
    paths = emit_reports(bundle, _report_dir(cfg))
    log.info("portfolio total return %.4f%%, %d report files in %s",
             100 * report.total_return, len(paths), _report_dir(cfg))


def render_tables(report_dir: Path) -> str:
    """Markdown rendering of the trading and prediction tables; returns and drawdowns as percentages."""
    def rows(name):
        with (report_dir / name).open(newline="") as fh:
            return list(csv.DictReader(fh))

    def pct(s):
        return "" if s == "" else f"{100 * float(s):.2f}%"

    def num(s, digits):
        return "" if s == "" else f"{float(s):.{digits}f}"

    lines = ["| Algorithm | Asset | Annualized Return | Sharpe Ratio | MDD |", "|---|---|---|---|---|"]
    for r in rows("trading_metrics.csv"):
        lines.append(f"| {r['algorithm']} | {r['asset']} | {pct(r['annualized_return'])} | "
                     f"{num(r['sharpe'], 2)} | {pct(r['max_drawdown'])} |")
    lines += ["", "| Algorithm | Asset | MSE | MAE | MAPE | R Square |", "|---|---|---|---|---|---|"]
    for r in rows("prediction_metrics.csv"):
        lines.append(f"| {r['algorithm']} | {r['asset']} | {num(r['mse_raw_price'], 4)} | "
                     f"{num(r['mae_raw_price'], 4)} | {num(r['mape'], 4)} | {num(r['r2'], 4)} |")
    return "\n".join(lines) + "\n"


def cmd_report(cfg: RunConfig) -> None:
    rdir = _report_dir(cfg)
    for name in ("trading_metrics.csv", "prediction_metrics.csv", "report.json"):
        if not (rdir / name).is_file():
            raise CommandFailed(f"missing {rdir / name}; run 'backtest' first", EXIT_INVALID)
    text = render_tables(rdir)
    atomic_write_text(rdir / "tables.md", text)
    sys.stderr.write(text)


def cmd_run_all(cfg: RunConfig) -> None:
    for step in (cmd_ingest_check, cmd_train, cmd_predict, cmd_backtest, cmd_report):
        log.info("== %s", step.__name__.removeprefix("cmd_").replace("_", "-"))
        step(cfg)


COMMANDS = {
    "ingest-check": cmd_ingest_check,
    "train": cmd_train,
    "predict": cmd_predict,
    "backtest": cmd_backtest,
    "report": cmd_report,
    "run-all": cmd_run_all,
}


def _parse_set(items: list[str]) -> dict[str, Any]:
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavefolio", description="Train the wavelet/attention LSTM forecaster and backtest its signals.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--jobs", type=int, help="parallel per-ticker jobs")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key; VALUE is parsed as JSON when possible")
        p.add_argument("-v", "--verbose", action="store_true")
        p.add_argument("-q", "--quiet", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s", force=True)
    try:
        overrides = _parse_set(args.set)
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out_dir"] = str(Path(args.out).resolve())
        if args.jobs is not None:
            overrides["jobs"] = args.jobs
        cfg = load_config(args.config, overrides)
        COMMANDS[args.command](cfg)
    except CommandFailed as exc:
        log.error("%s", exc)
        return exc.code
    except VALIDATION_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - top-level guard maps anything else to exit 2
        log.error("runtime failure: %s: %s", type(exc).__name__, exc)
        log.debug("traceback", exc_info=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
