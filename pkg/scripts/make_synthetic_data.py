"""Write four synthetic OHLCV CSVs and a matching run config.

    python scripts/make_synthetic_data.py OUTDIR [--bars N] [--epochs E]

Prices are rounded to four decimals the way vendor files usually are, so every
value survives the 12-significant-digit CSV formatting unchanged.
"""
import argparse
import json
from pathlib import Path

import numpy as np

from wavefolio.marketdata import TimeSeriesFrame, noisy_sine_frame, random_walk_frame, write_ohlcv_csv

TICKERS = ("AAA", "BBB", "CCC", "DDD")


def rounded(frame: TimeSeriesFrame) -> TimeSeriesFrame:
    values = frame.values.copy()
    values[:, :4] = np.round(values[:, :4], 4)
    values[:, 1] = values[:, :4].max(axis=1)
    values[:, 2] = values[:, :4].min(axis=1)
    values[:, 4] = np.round(values[:, 4])
    return TimeSeriesFrame(frame.ticker, frame.dates, values)


def make_frames(bars: int, seed: int = 0) -> list[TimeSeriesFrame]:
    return [
        rounded(random_walk_frame(bars, seed=seed, ticker="AAA", drift=4e-4)),
        rounded(random_walk_frame(bars, seed=seed + 1, ticker="BBB", start_price=50.0, vol=0.02)),
        rounded(noisy_sine_frame(bars, seed=seed + 2, ticker="CCC", period=40.0, noise=0.8)),
        rounded(random_walk_frame(bars, seed=seed + 3, ticker="DDD", start_price=20.0, drift=-2e-4)),
    ]


def write_fixture(out: Path, bars: int = 300, epochs: int = 3, hidden: int = 8, window: int = 16,
                  seed: int = 0) -> Path:
    data = out / "data"
    data.mkdir(parents=True, exist_ok=True)
    for frame in make_frames(bars, seed):
        write_ohlcv_csv(frame, data / f"{frame.ticker}.csv")
    config = {"tickers": list(TICKERS), "data_dir": "data", "out_dir": "out", "split_ratio": 0.8,
              "window": window, "hidden": hidden, "epochs": epochs, "batch_size": 32, "seed": seed}
    path = out / "config.json"
    path.write_text(json.dumps(config, indent=2) + "\n")
    return path


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("outdir", type=Path)
    parser.add_argument("--bars", type=int, default=2500)
    parser.add_argument("--epochs", type=int, default=50)
    parser.add_argument("--hidden", type=int, default=64)
    parser.add_argument("--window", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    path = write_fixture(args.outdir, args.bars, args.epochs, args.hidden, args.window, args.seed)
    print(path)


if __name__ == "__main__":
    main()
