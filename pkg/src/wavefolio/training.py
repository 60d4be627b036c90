"""Mini-batch Adam training of the forecaster on a windowed dataset."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .marketdata import WindowedDataset
from .model import ModelConfig, ModelParameters, model_backward, model_forward
from .numerics import Adam, AdamHyper, StepDecay, mse_loss

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainResult:
    params: ModelParameters
    loss_curve: list[float]


def train_model(dataset: WindowedDataset, config: ModelConfig, rng: np.random.Generator | None = None,
                log_every: int = 0) -> TrainResult:
    """Train from scratch. Every random draw comes from ``rng`` (default: seeded from ``config.seed``)."""
    n = len(dataset)
    if n == 0:
        raise TrainingError("empty dataset")
    if dataset.inputs.shape[1:] != (config.channels, config.window):
        raise TrainingError(f"dataset windows {dataset.inputs.shape[1:]} do not match config "
                            f"({config.channels}, {config.window})")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    params = ModelParameters.init(config, rng)
    opt = Adam(params.parameters(), AdamHyper(config.lr, config.beta1, config.beta2, config.adam_eps),
               StepDecay(config.lr_decay, config.lr_decay_every))
    targets = dataset.targets[:, None]
    curve = []
    for epoch in range(config.epochs):
        opt.set_epoch(epoch)
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            opt.zero_grad()
            pred, cache = model_forward(dataset.inputs[idx], params)
            loss, dpred = mse_loss(pred, targets[idx])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}")
            model_backward(dpred, cache, params)
            opt.step()
            total += loss * len(idx)
        curve.append(total / n)
        if log_every and (epoch % log_every == 0 or epoch == config.epochs - 1):
            log.info("epoch %d/%d  loss %.6g  lr %.3g", epoch + 1, config.epochs, curve[-1], opt.lr)
    return TrainResult(params, curve)
