# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Traffic accounting in bits per state change, and the per-step training log."""

import csv
import dataclasses
import logging
import math
from typing import Iterable, TextIO

from typing_extensions import Self

from elkc.blob import CompressedBlob
from elkc.errors import EmptyError

logger = logging.getLogger(__name__)

FLOAT32_BITS = 32

CSV_COLUMNS = (
    "step",
    "push_bytes_total",
    "pull_bytes_total",
    "bits_per_value_push",
    "bits_per_value_pull",
    "loss",
    "test_acc",
    "zero_frac",
)


@dataclasses.dataclass(frozen=True)
class TrafficSummary:
    """Aggregated payload traffic.

    Attributes:
        total_values: The number of transmitted state changes.
        total_payload_bits: The payload bits, headers excluded.
        total_header_bits: The container header bits.
    """

    total_values: int
    total_payload_bits: int
    total_header_bits: int = 0

    def __post_init__(self) -> None:
        """Validate the counts.

        Raises:
            EmptyError: If no values were counted.
            ValueError: If a bit count is negative.
        """
        if self.total_values < 1:
            raise EmptyError("Traffic summary of no values")
        if self.total_payload_bits < 0 or self.total_header_bits < 0:
            raise ValueError("Bit counts must be non-negative")

    @classmethod
    def from_counts(cls, values: int, payload_bytes: int, header_bytes: int = 0) -> Self:
        """Build a summary from byte counts.

        Args:
            values: The number of state changes.
            payload_bytes: The payload bytes.
            header_bytes: The header bytes.

        Returns:
            The summary.
        """
        return cls(
            total_values=values,
            total_payload_bits=8 * payload_bytes,
            total_header_bits=8 * header_bytes,
        )

    @property
    def bits_per_value(self) -> float:
        """Payload bits per state change."""
        return self.total_payload_bits / self.total_values

    @property
    def ratio(self) -> float:
        """Compression ratio against 32-bit values."""
        if not self.total_payload_bits:
            return math.inf
        return FLOAT32_BITS * self.total_values / self.total_payload_bits

    @property
    def gross_bits(self) -> int:
        """Payload and header bits."""
        return self.total_payload_bits + self.total_header_bits

    @property
    def gross_bits_per_value(self) -> float:
        """Payload and header bits per state change."""
        return self.gross_bits / self.total_values

    def __add__(self, other: object) -> "TrafficSummary":
        """Combine two summaries.

        Args:
            other: The summary to add.

        Returns:
            The summary over both inputs.
        """
        if not isinstance(other, TrafficSummary):
            return NotImplemented
        return TrafficSummary(
            total_values=self.total_values + other.total_values,
            total_payload_bits=self.total_payload_bits + other.total_payload_bits,
            total_header_bits=self.total_header_bits + other.total_header_bits,
        )


def summarize(blobs: Iterable[CompressedBlob]) -> TrafficSummary:
    """Aggregate the traffic of blobs.

    Args:
        blobs: The blobs.

    Raises:
        EmptyError: If no blobs are given.

    Returns:
        The traffic summary.
    """
    values = payload_bytes = header_bytes = 0
    for blob in blobs:
        values += blob.size
        payload_bytes += blob.payload_len
        header_bytes += blob.header_len
    if not values:
        raise EmptyError("Cannot summarize no blobs")
    return TrafficSummary.from_counts(values, payload_bytes, header_bytes)


@dataclasses.dataclass(frozen=True)
class StepMetrics:
    """The record of one training step.

    Attributes:
        step: The zero-based step counter.
        push_bytes: Push payload bytes per worker.
        pull_bytes_total: Pull payload bytes delivered to all workers.
        push_traffic: Push traffic of compressed tensors, None when nothing was pushed.
        pull_traffic: Pull traffic of compressed tensors, None when nothing was pulled.
        loss: The mean training loss of the step's minibatches.
        test_acc: The test accuracy, None on steps without evaluation.
        zero_frac: The zero share of quantized ternary tensors, None without any.
    """

    step: int
    push_bytes: tuple[int, ...]
    pull_bytes_total: int
    push_traffic: TrafficSummary | None
    pull_traffic: TrafficSummary | None
    loss: float
    test_acc: float | None = None
    zero_frac: float | None = None

    @property
    def push_bytes_total(self) -> int:
        """Push payload bytes of all workers."""
        return sum(self.push_bytes)

    @property
    def bits_per_value_push(self) -> float | None:
        """Push payload bits per compressed state change."""
        return self.push_traffic.bits_per_value if self.push_traffic else None

    @property
    def bits_per_value_pull(self) -> float | None:
        """Pull payload bits per compressed state change."""
        return self.pull_traffic.bits_per_value if self.pull_traffic else None

    def to_row(self) -> dict[str, object]:
        """Get the CSV row of the step.

        Returns:
            The cells by column; missing values are empty strings.
        """
        row: dict[str, object] = {
            "step": self.step,
            "push_bytes_total": self.push_bytes_total,
            "pull_bytes_total": self.pull_bytes_total,
            "bits_per_value_push": self.bits_per_value_push,
            "bits_per_value_pull": self.bits_per_value_pull,
            "loss": self.loss,
            "test_acc": self.test_acc,
            "zero_frac": self.zero_frac,
        }
        return {key: "" if value is None else value for key, value in row.items()}


@dataclasses.dataclass
class MetricsLog:
    """The per-step record of a training run.

    Attributes:
        steps: The step records in execution order.
    """

    steps: list[StepMetrics] = dataclasses.field(default_factory=list)

    def append(self, metrics: StepMetrics) -> None:
        """Record a step.

        Args:
            metrics: The step record.
        """
        self.steps.append(metrics)

    @property
    def final_loss(self) -> float | None:
        """The training loss of the last step."""
        return self.steps[-1].loss if self.steps else None

    @property
    def final_accuracy(self) -> float | None:
        """The last recorded test accuracy."""
        accuracies = [step.test_acc for step in self.steps if step.test_acc is not None]
        return accuracies[-1] if accuracies else None

    def push_summary(self) -> TrafficSummary:
        """Aggregate the compressed push traffic of the run.

        Raises:
            EmptyError: If no step pushed compressed tensors.

        Returns:
            The traffic summary.
        """
        return _sum_traffic(step.push_traffic for step in self.steps)

    def pull_summary(self) -> TrafficSummary:
        """Aggregate the compressed pull traffic of the run.

        Raises:
            EmptyError: If no step pulled compressed tensors.

        Returns:
            The traffic summary.
        """
        return _sum_traffic(step.pull_traffic for step in self.steps)

    def write_csv(self, stream: TextIO) -> None:
        """Write the log as CSV with one header row.

        Args:
            stream: The text stream to write to.
        """
        writer = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(step.to_row() for step in self.steps)


def _sum_traffic(summaries: Iterable[TrafficSummary | None]) -> TrafficSummary:
    """Add up the present summaries.

    Args:
        summaries: Summaries, None for steps without traffic.

    Raises:
        EmptyError: If no summary is present.

    Returns:
        The combined summary.
    """
    present = [summary for summary in summaries if summary is not None]
    if not present:
        raise EmptyError("No traffic was recorded")
    total = present[0]
    for summary in present[1:]:
        total = total + summary
    return total
