# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Bulk synchronous parameter-server training simulator.

Every step runs forward and backward passes on each worker's shard, pushes per-tensor
compressed gradients, aggregates them in worker order on the server, applies momentum
SGD and pulls one shared compressed model delta per tensor back into every worker
replica. Traffic is counted from the blobs actually produced; the network itself is not
simulated.
"""

import dataclasses
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import numpy.typing as npt

from elkc import blob
from elkc.baselines import CodecKind, CodecName
from elkc.blob import CompressedBlob, TERNARY_CODECS
from elkc.config import DEFAULT_SEED, LrDecay
from elkc.errors import ConfigError, DivergenceError, NonFiniteError
from elkc.metrics import MetricsLog, StepMetrics, TrafficSummary, summarize
from elkc.quant3 import ErrorContext
from elkc.tensor import DenseTensor
from elkc.utils import RngStream, named_rng

logger = logging.getLogger(__name__)

CENTER_SCALE = 2.0
PUSH_DIRECTION = 0
PULL_DIRECTION = 1


@dataclasses.dataclass(frozen=True)
class ModelConfig:
    """Dimensions of the one-hidden-layer perceptron.

    Attributes:
        input_dim: The feature count.
        hidden_dim: The hidden unit count.
        classes: The class count.
    """

    input_dim: int = 32
    hidden_dim: int = 80
    classes: int = 10

    def __post_init__(self) -> None:
        """Validate the dimensions.

        Raises:
            ConfigError: If a dimension is out of range.
        """
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("Model dimensions must be positive")
        if self.classes < 2:
            raise ConfigError(f"At least two classes are needed, got {self.classes}")


@dataclasses.dataclass(frozen=True)
class DatasetConfig:
    """The synthetic Gaussian blob dataset.

    Attributes:
        n_train: The training example count.
        n_test: The test example count.
        blob_stddev: The per-feature standard deviation around each class center.
    """

    n_train: int = 5000
    n_test: int = 1000
    blob_stddev: float = 0.4

    def __post_init__(self) -> None:
        """Validate the dataset sizes.

        Raises:
            ConfigError: If a value is out of range.
        """
        if self.n_train < 1 or self.n_test < 1:
            raise ConfigError("Dataset sizes must be positive")
        if not math.isfinite(self.blob_stddev) or self.blob_stddev < 0:
            raise ConfigError(f"Blob stddev must be non-negative, got {self.blob_stddev}")


@dataclasses.dataclass(frozen=True)
class LrSchedule:
    """The learning rate schedule.

    Attributes:
        base_lr: The learning rate of the first step.
        final_lr: The learning rate cosine decay reaches after the last step.
        decay: The schedule shape.
    """

    base_lr: float = 0.1
    final_lr: float = 0.001
    decay: LrDecay = LrDecay.COSINE

    def __post_init__(self) -> None:
        """Validate the learning rates.

        Raises:
            ConfigError: If a learning rate is negative or not finite.
        """
        for value in (self.base_lr, self.final_lr):
            if not math.isfinite(value) or value < 0:
                raise ConfigError(f"Learning rates must be non-negative, got {value}")


_INT_KEYS = frozenset(
    (
        "workers",
        "steps",
        "batch_per_worker",
        "seed",
        "eval_interval",
        "small_tensor_threshold",
        "threads",
        "input_dim",
        "hidden_dim",
        "classes",
        "n_train",
        "n_test",
    )
)
_FLOAT_KEYS = frozenset(("momentum", "weight_decay", "base_lr", "final_lr", "blob_stddev"))
_CODEC_KEYS = frozenset(("codec", "push_codec", "pull_codec"))
_KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _CODEC_KEYS | {"lr_decay"}
_MODEL_KEYS = tuple(field.name for field in dataclasses.fields(ModelConfig))
_DATASET_KEYS = tuple(field.name for field in dataclasses.fields(DatasetConfig))


def _coerce(key: str, value: object) -> object:
    """Convert a configuration value to its field type.

    Args:
        key: The configuration key.
        value: The raw value.

    Raises:
        ConfigError: If the value cannot be converted.

    Returns:
        The typed value.
    """
    try:
        if key in _CODEC_KEYS:
            return value if isinstance(value, CodecKind) else CodecKind.from_str(str(value))
        if key == "lr_decay":
            return value if isinstance(value, LrDecay) else LrDecay.from_str(str(value))
        if isinstance(value, bool):
            raise ConfigError(f"{key} must be a number, got {value}")
        if key in _INT_KEYS:
            if isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"{key} must be an integer, got {value}")
            return int(value)  # type: ignore[call-overload]
        return float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"Invalid value for {key}: {value!r}") from exc


@dataclasses.dataclass(frozen=True)
class SimConfig:  # pylint: disable=too-many-instance-attributes
    """The training simulator configuration.

    Attributes:
        workers: The worker count W.
        steps: The number of training steps.
        batch_per_worker: The minibatch size of each worker.
        lr_schedule: The learning rate schedule.
        momentum: The server momentum, within [0, 1).
        weight_decay: The L2 coefficient added to aggregated gradients.
        push_codec: The codec of worker to server gradient pushes.
        pull_codec: The codec of server to worker model delta pulls.
        seed: The master seed of all random streams.
        model: The model dimensions.
        dataset: The synthetic dataset.
        eval_interval: Steps between test evaluations.
        small_tensor_threshold: Tensors with fewer elements travel uncompressed.
        threads: Worker threads computing gradients; results do not depend on it.
    """

    workers: int = 4
    steps: int = 2000
    batch_per_worker: int = 32
    lr_schedule: LrSchedule = LrSchedule()
    momentum: float = 0.9
    weight_decay: float = 0.0
    push_codec: CodecKind = CodecKind(name=CodecName.FLOAT32)
    pull_codec: CodecKind = CodecKind(name=CodecName.FLOAT32)
    seed: int = DEFAULT_SEED
    model: ModelConfig = ModelConfig()
    dataset: DatasetConfig = DatasetConfig()
    eval_interval: int = 100
    small_tensor_threshold: int = 256
    threads: int = 1

    def __post_init__(self) -> None:
        """Validate the configuration.

        Raises:
            ConfigError: If a value is out of range.
        """
        for name in ("workers", "steps", "batch_per_worker", "eval_interval", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1, got {getattr(self, name)}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"Momentum must be within [0, 1), got {self.momentum}")
        if not math.isfinite(self.weight_decay) or self.weight_decay < 0:
            raise ConfigError(f"Weight decay must be non-negative, got {self.weight_decay}")
        if self.seed < 0:
            raise ConfigError(f"Seed must be non-negative, got {self.seed}")
        if self.small_tensor_threshold < 0:
            raise ConfigError("Small tensor threshold must be non-negative")
        if self.pull_codec.name is CodecName.LOCAL_STEPS:
            raise ConfigError("Local steps apply to pushes only")
        if self.dataset.n_train < self.global_batch:
            raise ConfigError(
                f"{self.dataset.n_train} training examples cannot fill a global batch of "
                f"{self.global_batch}"
            )

    @property
    def global_batch(self) -> int:
        """The examples consumed per step across all workers."""
        return self.workers * self.batch_per_worker

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "SimConfig":
        """Build a configuration from flat key=value settings.

        The codec key sets both directions; push_codec and pull_codec take precedence.

        Args:
            mapping: Settings by field name; absent fields keep their defaults.

        Raises:
            ConfigError: If a key is unknown or a value is invalid.

        Returns:
            The configuration.
        """
        unknown = sorted(set(mapping) - _KNOWN_KEYS)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(unknown)}")
        values = {key: _coerce(key, value) for key, value in mapping.items()}
        codec = values.pop("codec", None)
        if codec is not None:
            values.setdefault("push_codec", codec)
            values.setdefault("pull_codec", codec)
        model = ModelConfig(**{key: values.pop(key) for key in _MODEL_KEYS if key in values})
        dataset = DatasetConfig(
            **{key: values.pop(key) for key in _DATASET_KEYS if key in values}
        )
        schedule_values = {
            key: values.pop(key) for key in ("base_lr", "final_lr") if key in values
        }
        if "lr_decay" in values:
            schedule_values["decay"] = values.pop("lr_decay")
        return cls(
            model=model,
            dataset=dataset,
            lr_schedule=LrSchedule(**schedule_values),  # type: ignore[arg-type]
            **values,  # type: ignore[arg-type]
        )


class Dataset(NamedTuple):
    """Labelled examples.

    Attributes:
        features: The feature matrix, one row per example.
        labels: The class of every example.
    """

    features: npt.NDArray[np.float32]
    labels: npt.NDArray[np.int64]


def make_dataset(cfg: SimConfig) -> tuple[Dataset, Dataset]:
    """Generate the Gaussian blob classification task.

    Class c is centered at a random unit vector scaled by 2.0; classes are balanced.

    Args:
        cfg: The simulator configuration.

    Returns:
        The training and test sets.
    """
    rng = named_rng(cfg.seed, RngStream.DATA)
    centers = rng.standard_normal((cfg.model.classes, cfg.model.input_dim))
    centers *= CENTER_SCALE / np.linalg.norm(centers, axis=1, keepdims=True)

    def sample(count: int) -> Dataset:
        """Draw a balanced set of examples.

        Args:
            count: The example count.

        Returns:
            The examples.
        """
        labels = rng.permutation(np.arange(count) % cfg.model.classes)
        noise = rng.normal(0.0, cfg.dataset.blob_stddev, (count, cfg.model.input_dim))
        return Dataset(features=(centers[labels] + noise).astype(np.float32), labels=labels)

    return sample(cfg.dataset.n_train), sample(cfg.dataset.n_test)


@dataclasses.dataclass
class PullChannel:
    """The server side compression state of one pulled tensor.

    Attributes:
        ctx: The shared pull context.
        codec: The codec of the tensor's pulls.
        compressions: How often the tensor was compressed.
    """

    ctx: ErrorContext
    codec: CodecKind
    compressions: int = 0


@dataclasses.dataclass
class SimState:  # pylint: disable=too-many-instance-attributes
    """The mutable state of a simulated training run.

    Attributes:
        config: The simulator configuration.
        global_model: The server parameters W1, b1, W2, b2.
        worker_models: The parameter replica of every worker.
        push_codecs: The push codec of every tensor after the small tensor bypass.
        push_contexts: The push context of every worker and tensor.
        pull_channels: The shared pull state of every tensor.
        velocities: The server momentum buffers.
        train: The training set.
        test: The test set.
        shuffle_rng: The generator of per-epoch permutations.
        order: The current epoch's example permutation.
        cursor: The position of the next global batch within order.
        metrics: The per-step log.
        step: The number of completed steps.
        pool: The worker thread pool, None in single-threaded mode.
    """

    config: SimConfig
    global_model: list[DenseTensor]
    worker_models: list[list[DenseTensor]]
    push_codecs: list[CodecKind]
    push_contexts: list[list[ErrorContext]]
    pull_channels: list[PullChannel]
    velocities: list[npt.NDArray[np.float32]]
    train: Dataset
    test: Dataset
    shuffle_rng: np.random.Generator
    order: npt.NDArray[np.int64]
    cursor: int = 0
    metrics: MetricsLog = dataclasses.field(default_factory=MetricsLog)
    step: int = 0
    pool: ThreadPoolExecutor | None = None


def learning_rate(cfg: SimConfig, step: int) -> float:
    """Get the learning rate of a step.

    Args:
        cfg: The simulator configuration.
        step: The zero-based step counter.

    Returns:
        The scheduled learning rate.
    """
    schedule = cfg.lr_schedule
    if schedule.decay is LrDecay.CONSTANT:
        return schedule.base_lr
    progress = min(step, cfg.steps) / cfg.steps
    cosine = 0.5 * (1 + math.cos(math.pi * progress))
    return schedule.final_lr + (schedule.base_lr - schedule.final_lr) * cosine


def effective_codec(kind: CodecKind, size: int, threshold: int) -> CodecKind:
    """Apply the small tensor bypass.

    Args:
        kind: The configured codec.
        size: The tensor element count.
        threshold: Tensors with fewer elements travel uncompressed.

    Returns:
        The codec the tensor uses.
    """
    if kind.lossless or size >= threshold:
        return kind
    return CodecKind(name=CodecName.FLOAT32)


def init_params(cfg: SimConfig) -> list[DenseTensor]:
    """Initialize the perceptron with He-scaled weights and zero biases.

    Args:
        cfg: The simulator configuration.

    Returns:
        The parameters W1, b1, W2, b2.
    """
    rng = named_rng(cfg.seed, RngStream.INIT)
    dims = cfg.model
    w1 = rng.standard_normal((dims.input_dim, dims.hidden_dim)) * math.sqrt(2 / dims.input_dim)
    w2 = rng.standard_normal((dims.hidden_dim, dims.classes)) * math.sqrt(2 / dims.hidden_dim)
    return [
        DenseTensor.from_array(w1),
        DenseTensor.zeros((dims.hidden_dim,)),
        DenseTensor.from_array(w2),
        DenseTensor.zeros((dims.classes,)),
    ]


def init_state(cfg: SimConfig) -> SimState:
    """Create the state of a fresh run.

    Args:
        cfg: The simulator configuration.

    Returns:
        The initial state; every replica equals the global model.
    """
    params = init_params(cfg)
    train, test = make_dataset(cfg)
    threshold = cfg.small_tensor_threshold
    push_codecs = [effective_codec(cfg.push_codec, p.size, threshold) for p in params]
    push_contexts = [
        [
            blob.new_context(
                kind, p.dims, named_rng(cfg.seed, RngStream.CODEC, PUSH_DIRECTION, worker, i)
            )
            for i, (kind, p) in enumerate(zip(push_codecs, params))
        ]
        for worker in range(cfg.workers)
    ]
    pull_channels = []
    for i, p in enumerate(params):
        kind = effective_codec(cfg.pull_codec, p.size, threshold)
        rng = named_rng(cfg.seed, RngStream.CODEC, PULL_DIRECTION, 0, i)
        pull_channels.append(PullChannel(ctx=blob.new_context(kind, p.dims, rng), codec=kind))
    shuffle_rng = named_rng(cfg.seed, RngStream.SHUFFLE)
    return SimState(
        config=cfg,
        global_model=list(params),
        worker_models=[list(params) for _ in range(cfg.workers)],
        push_codecs=push_codecs,
        push_contexts=push_contexts,
        pull_channels=pull_channels,
        velocities=[np.zeros(p.size, dtype=np.float32) for p in params],
        train=train,
        test=test,
        shuffle_rng=shuffle_rng,
        order=shuffle_rng.permutation(cfg.dataset.n_train),
    )


def _forward(
    params: Sequence[DenseTensor], features: npt.NDArray[np.float32]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Run the perceptron in double precision.

    Args:
        params: The parameters W1, b1, W2, b2.
        features: The input rows.

    Returns:
        The hidden pre-activations, hidden activations and logits.
    """
    w1, b1, w2, b2 = (p.array().astype(np.float64) for p in params)
    pre = features.astype(np.float64) @ w1 + b1
    hidden = np.maximum(pre, 0.0)
    return pre, hidden, hidden @ w2 + b2


def compute_gradients(
    params: Sequence[DenseTensor],
    features: npt.NDArray[np.float32],
    labels: npt.NDArray[np.int64],
) -> tuple[float, list[DenseTensor]]:
    """Compute the mean softmax cross-entropy loss and its parameter gradients.

    Args:
        params: The parameters W1, b1, W2, b2.
        features: The minibatch rows.
        labels: The minibatch classes.

    Raises:
        DivergenceError: If the loss or a gradient is not finite.

    Returns:
        The loss and the gradients in parameter order.
    """
    pre, hidden, logits = _forward(params, features)
    w2 = params[2].array().astype(np.float64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(labels.size)
    loss = float(-log_probs[rows, labels].mean())
    if not math.isfinite(loss):
        raise DivergenceError(f"Training loss became {loss}")
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    dlogits /= labels.size
    dhidden = dlogits @ w2.T
    dhidden[pre <= 0] = 0.0
    grads = (
        features.astype(np.float64).T @ dhidden,
        dhidden.sum(axis=0),
        hidden.T @ dlogits,
        dlogits.sum(axis=0),
    )
    try:
        return loss, [DenseTensor.from_array(grad) for grad in grads]
    except NonFiniteError as exc:
        raise DivergenceError("Gradients became non-finite") from exc


def evaluate(params: Sequence[DenseTensor], dataset: Dataset) -> float:
    """Measure classification accuracy.

    Args:
        params: The parameters W1, b1, W2, b2.
        dataset: The examples.

    Returns:
        The share of correctly classified examples.
    """
    _, _, logits = _forward(params, dataset.features)
    return float(np.mean(logits.argmax(axis=1) == dataset.labels))


def server_update(
    state: SimState, grads: Sequence[DenseTensor], lr: float
) -> list[DenseTensor]:
    """Apply momentum SGD to the global model.

    Args:
        state: The run state; global model and velocities are updated in place.
        grads: The aggregated gradients in parameter order.
        lr: The learning rate.

    Returns:
        The model delta of every tensor, -lr times the momentum-adjusted gradient.
    """
    cfg = state.config
    deltas = []
    for i, (param, grad) in enumerate(zip(state.global_model, grads)):
        gradient = grad.data + np.float32(cfg.weight_decay) * param.data
        velocity = np.float32(cfg.momentum) * state.velocities[i] + gradient
        state.velocities[i] = velocity
        delta = DenseTensor(dims=param.dims, data=-np.float32(lr) * velocity)
        state.global_model[i] = DenseTensor(dims=param.dims, data=param.data + delta.data)
        deltas.append(delta)
    return deltas


def shared_pull_compress(
    channel: PullChannel, delta: DenseTensor, step: int = 0
) -> CompressedBlob:
    """Compress a model delta once for all workers.

    Args:
        channel: The pull state of the tensor.
        delta: The model delta.
        step: The zero-based step counter.

    Raises:
        ConfigError: If the pull codec withholds the delta.

    Returns:
        The blob every worker receives.
    """
    compressed = blob.compress_with(channel.codec, channel.ctx, delta, step)
    if compressed is None:
        raise ConfigError(f"Pull codec {channel.codec} produced no blob")
    channel.compressions += 1
    return compressed


class _WorkerPush(NamedTuple):
    """One worker's step result.

    Attributes:
        loss: The minibatch loss.
        blobs: The pushed blob of every tensor, None where local steps withhold it.
    """

    loss: float
    blobs: list[CompressedBlob | None]


def _worker_step(state: SimState, worker: int, shard: npt.NDArray[np.int64]) -> _WorkerPush:
    """Compute and compress one worker's gradients.

    Only the worker's own contexts are touched, so workers may run concurrently.

    Args:
        state: The run state.
        worker: The worker index.
        shard: The worker's example indices.

    Raises:
        DivergenceError: If the loss, a gradient or an accumulated push is not finite.

    Returns:
        The loss and pushed blobs.
    """
    loss, grads = compute_gradients(
        state.worker_models[worker], state.train.features[shard], state.train.labels[shard]
    )
    try:
        blobs = [
            blob.compress_with(kind, ctx, grad, state.step)
            for kind, ctx, grad in zip(state.push_codecs, state.push_contexts[worker], grads)
        ]
    except NonFiniteError as exc:
        raise DivergenceError(f"Worker {worker} push became non-finite") from exc
    return _WorkerPush(loss=loss, blobs=blobs)


def _next_shards(state: SimState) -> npt.NDArray[np.int64]:
    """Take the next global batch, reshuffling when the epoch is exhausted.

    Args:
        state: The run state.

    Returns:
        The example indices, one contiguous row per worker.
    """
    cfg = state.config
    if state.cursor + cfg.global_batch > cfg.dataset.n_train:
        state.order = state.shuffle_rng.permutation(cfg.dataset.n_train)
        state.cursor = 0
    batch = state.order[state.cursor : state.cursor + cfg.global_batch]
    state.cursor += cfg.global_batch
    return batch.reshape(cfg.workers, cfg.batch_per_worker)


def _compressed_traffic(
    blobs: Sequence[CompressedBlob], threshold: int
) -> TrafficSummary | None:
    """Summarize the blobs of tensors large enough to be compressed.

    Args:
        blobs: The step's blobs of one direction.
        threshold: The small tensor threshold.

    Returns:
        The summary, None without such blobs.
    """
    large = [b for b in blobs if b.size >= threshold]
    return summarize(large) if large else None


@dataclasses.dataclass
class _ZeroCounter:
    """Zero entries among the ternary tensors of a step.

    Attributes:
        zeros: The zero entry count.
        values: The ternary entry count.
    """

    zeros: int = 0
    values: int = 0

    def add(self, compressed: CompressedBlob, decoded: DenseTensor) -> None:
        """Count a decoded blob if its codec is ternary.

        Args:
            compressed: The blob.
            decoded: Its decompressed tensor.
        """
        if compressed.codec_id in TERNARY_CODECS:
            self.zeros += decoded.size - int(np.count_nonzero(decoded.data))
            self.values += decoded.size

    @property
    def fraction(self) -> float | None:
        """The zero share, None without ternary tensors."""
        return self.zeros / self.values if self.values else None


def _aggregate(
    state: SimState, pushes: Sequence[_WorkerPush], zeros: _ZeroCounter
) -> list[DenseTensor]:
    """Average the decompressed pushes of all workers.

    Local step pushes carry the sum of n gradients and are averaged over W * n.

    Args:
        state: The run state.
        pushes: Every worker's complete push.
        zeros: The step's zero counter.

    Returns:
        The aggregated gradient of every tensor.
    """
    cfg = state.config
    period = 1
    if cfg.push_codec.name is CodecName.LOCAL_STEPS:
        period = cfg.push_codec.local_steps
    grads = []
    for i, param in enumerate(state.global_model):
        total = np.zeros(param.size, dtype=np.float64)
        # fixed worker order keeps threaded and sequential runs identical
        for push in pushes:
            pushed = push.blobs[i]
            assert pushed is not None  # nosec: B101
            decoded = blob.decompress(pushed)
            zeros.add(pushed, decoded)
            total += decoded.data
        grads.append(DenseTensor(dims=param.dims, data=total / (cfg.workers * period)))
    return grads


def _server_round(
    state: SimState,
    pushes: Sequence[_WorkerPush],
    zeros: _ZeroCounter,
    pull_blobs: list[CompressedBlob],
    lr: float,
) -> None:
    """Aggregate the pushes, update the global model and pull the deltas into the replicas.

    Args:
        state: The run state, updated in place.
        pushes: Every worker's complete push.
        zeros: The step's zero counter.
        pull_blobs: Receives the pulled blob of every tensor.
        lr: The learning rate.
    """
    grads = _aggregate(state, pushes, zeros)
    deltas = server_update(state, grads, lr)
    for i, delta in enumerate(deltas):
        pulled = shared_pull_compress(state.pull_channels[i], delta, state.step)
        pull_blobs.append(pulled)
        # workers decode the same bytes, so one decode serves every replica
        decoded = blob.decompress(pulled)
        zeros.add(pulled, decoded)
        for replica in state.worker_models:
            replica[i] = DenseTensor(dims=delta.dims, data=replica[i].data + decoded.data)


def train_step(state: SimState) -> SimState:
    """Run one bulk synchronous training step.

    Args:
        state: The run state, updated in place.

    Raises:
        DivergenceError: If the loss, the model or any exchanged tensor becomes non-finite.

    Returns:
        The updated state.
    """
    cfg = state.config
    step = state.step
    lr = learning_rate(cfg, step)
    shards = _next_shards(state)
    if state.pool is not None:
        pushes = list(
            state.pool.map(lambda w: _worker_step(state, w, shards[w]), range(cfg.workers))
        )
    else:
        pushes = [_worker_step(state, w, shards[w]) for w in range(cfg.workers)]
    loss = float(np.mean([push.loss for push in pushes]))

    pushed = [b for push in pushes for b in push.blobs if b is not None]
    zeros = _ZeroCounter()
    pull_blobs: list[CompressedBlob] = []
    if len(pushed) == len(pushes) * len(state.global_model):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                _server_round(state, pushes, zeros, pull_blobs, lr)
        except NonFiniteError as exc:
            raise DivergenceError(f"Model update became non-finite at step {step}") from exc

    test_acc = None
    if (step + 1) % cfg.eval_interval == 0 or step + 1 == cfg.steps:
        test_acc = evaluate(state.global_model, state.test)
        logger.info("Step %s: loss %.6f, test accuracy %.4f.", step, loss, test_acc)
    metrics = StepMetrics(
        step=step,
        push_bytes=tuple(
            sum(b.payload_len for b in push.blobs if b is not None) for push in pushes
        ),
        pull_bytes_total=cfg.workers * sum(b.payload_len for b in pull_blobs),
        push_traffic=_compressed_traffic(pushed, cfg.small_tensor_threshold),
        pull_traffic=_compressed_traffic(pull_blobs, cfg.small_tensor_threshold),
        loss=loss,
        test_acc=test_acc,
        zero_frac=zeros.fraction,
    )
    logger.debug(
        "Step %s: pushed %s bytes, pulled %s bytes.",
        step,
        metrics.push_bytes_total,
        metrics.pull_bytes_total,
    )
    state.metrics.append(metrics)
    state.step += 1
    return state


def run(cfg: SimConfig) -> MetricsLog:
    """Train for the configured number of steps.

    Args:
        cfg: The simulator configuration.

    Raises:
        DivergenceError: If the training loss becomes non-finite.

    Returns:
        The per-step log.
    """
    logger.info(
        "Starting simulation: %s workers, %s steps, push %s, pull %s, seed %s.",
        cfg.workers,
        cfg.steps,
        cfg.push_codec,
        cfg.pull_codec,
        cfg.seed,
    )
    state = init_state(cfg)
    try:
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                state.pool = pool
                for _ in range(cfg.steps):
                    train_step(state)
        else:
            for _ in range(cfg.steps):
                train_step(state)
    except DivergenceError:
        logger.error("Simulation diverged at step %s.", state.step)
        raise
    finally:
        state.pool = None
    logger.info(
        "Finished simulation: final loss %s, final accuracy %s.",
        state.metrics.final_loss,
        state.metrics.final_accuracy,
    )
    return state.metrics
