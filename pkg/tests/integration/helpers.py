# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Helper utilities for integration tests."""

import logging
import statistics
from typing import Iterable

import numpy as np

from elkc import psim
from elkc.baselines import CodecKind
from elkc.psim import SimConfig, SimState

logger = logging.getLogger(__name__)


def train(cfg: SimConfig) -> SimState:
    """Run a simulation and keep its final state.

    Args:
        cfg: The simulator configuration.

    Returns:
        The state after the last step.
    """
    state = psim.init_state(cfg)
    for _ in range(cfg.steps):
        psim.train_step(state)
    return state


def flat_params(state: SimState) -> np.ndarray:
    """Concatenate the global model.

    Args:
        state: The run state.

    Returns:
        All parameters in one float64 vector.
    """
    return np.concatenate([p.data.astype(np.float64) for p in state.global_model])


def median_accuracy(codec: CodecKind, seeds: Iterable[int]) -> float:
    """Train the default task once per seed with one codec in both directions.

    Args:
        codec: The push and pull codec.
        seeds: The master seeds.

    Returns:
        The median final test accuracy.
    """
    accuracies = []
    for seed in seeds:
        log = psim.run(SimConfig(push_codec=codec, pull_codec=codec, seed=seed))
        assert log.final_accuracy is not None
        logger.info("Codec %s seed %s: accuracy %.4f.", codec, seed, log.final_accuracy)
        accuracies.append(log.final_accuracy)
    return statistics.median(accuracies)


def median_tail_loss(codec: CodecKind, seeds: Iterable[int], window: int = 100) -> float:
    """Train the default task once per seed and average the loss of its last steps.

    Args:
        codec: The push and pull codec.
        seeds: The master seeds.
        window: The number of final steps averaged per run.

    Returns:
        The median over seeds of the mean minibatch loss of the last steps.
    """
    losses = []
    for seed in seeds:
        log = psim.run(SimConfig(push_codec=codec, pull_codec=codec, seed=seed))
        tail = float(np.mean([step.loss for step in log.steps[-window:]]))
        logger.info("Codec %s seed %s: final loss %.6f.", codec, seed, tail)
        losses.append(tail)
    return statistics.median(losses)
