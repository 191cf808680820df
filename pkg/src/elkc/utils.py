# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Utilities used by the app."""

import logging
import statistics
import time
from enum import IntEnum
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


class RngStream(IntEnum):
    """Independent random streams derived from one master seed.

    Attributes:
        DATA: Synthetic dataset generation.
        INIT: Model parameter initialization.
        SHUFFLE: Per-epoch reshuffling of the training set.
        CODEC: Stochastic codecs, one child stream per context.
        BENCH: Benchmark tensor generation.
    """

    DATA = 0
    INIT = 1
    SHUFFLE = 2
    CODEC = 3
    BENCH = 4


def named_rng(seed: int, stream: RngStream, *children: int) -> np.random.Generator:
    """Create the generator of a named stream.

    Streams with different names or children never share state, so adding draws to one
    stream (e.g. switching to a stochastic codec) leaves the others untouched.

    Args:
        seed: The master seed.
        stream: The stream name.
        children: Further spawn key components, e.g. worker and tensor index.

    Returns:
        The seeded generator.
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(int(stream), *children))
    return np.random.Generator(np.random.PCG64(sequence))


def median_runtime(func: Callable[[], object], iters: int) -> float:
    """Run a function repeatedly and report its median wall-clock duration.

    Args:
        func: The function to time.
        iters: Number of timed runs.

    Raises:
        ValueError: If iters is not positive.

    Returns:
        The median duration in seconds.
    """
    if iters < 1:
        raise ValueError(f"iters must be positive, got {iters}")
    durations = []
    for _ in range(iters):
        start = time.perf_counter()
        func()
        durations.append(time.perf_counter() - start)
    logger.debug("Timed %s runs, min %.6fs max %.6fs.", iters, min(durations), max(durations))
    return statistics.median(durations)
