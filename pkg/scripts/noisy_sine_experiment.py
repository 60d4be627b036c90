"""Train on a seeded noisy sine and compare held-out error with the persistence forecast.

    python scripts/noisy_sine_experiment.py [--epochs 30] [--hidden 64] [--seed 7]

Persistence predicts tomorrow's close as today's close; a model that has
learned anything about the periodic component should beat it.
"""
import argparse
import time
from dataclasses import dataclass

import numpy as np

from wavefolio.marketdata import fit_scaler, holdout_windows, make_windows, noisy_sine_frame, train_test_split
from wavefolio.model import ModelConfig, predict
from wavefolio.training import train_model


@dataclass
class SineResult:
    loss_curve: list[float]
    model_mse: float
    persistence_mse: float
    seconds: float


def run(bars: int = 2000, ratio: float = 0.8, data_seed: int = 7, **model_kwargs) -> SineResult:
    frame = noisy_sine_frame(bars, seed=data_seed)
    train, test = train_test_split(frame, ratio)
    scaler = fit_scaler(train)
    cfg = ModelConfig(**model_kwargs)
    start = time.perf_counter()
    result = train_model(make_windows(train, scaler, cfg.window), cfg)
    held = holdout_windows(train, test, scaler, cfg.window)
    pred = scaler.invert_close(predict(held.inputs, result.params))
    return SineResult(
        loss_curve=result.loss_curve,
        model_mse=float(np.mean((pred - held.target_close) ** 2)),
        persistence_mse=float(np.mean((held.prev_close - held.target_close) ** 2)),
        seconds=time.perf_counter() - start,
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--bars", type=int, default=2000)
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--hidden", type=int, default=64)
    parser.add_argument("--seed", type=int, default=7, help="data seed")
    args = parser.parse_args()
    res = run(args.bars, data_seed=args.seed, epochs=args.epochs, hidden=args.hidden)
    print(f"training loss  {res.loss_curve[0]:.5f} -> {res.loss_curve[-1]:.5f}")
    print(f"held-out MSE   model {res.model_mse:.4f}   persistence {res.persistence_mse:.4f}")
    print(f"wall time      {res.seconds:.1f} s")


if __name__ == "__main__":
    main()
