# Copyright 2026 The elkc Authors.
# See LICENSE file for licensing details.

"""Main entrypoint for elkc cli application."""

import logging as stdlib_logging
import math
import os
import sys
from pathlib import Path
from typing import Any, TextIO

import click
import jinja2
import numpy as np

from elkc import blob, config, logging, psim
from elkc.baselines import CodecKind, CodecName
from elkc.errors import ConfigError, DivergenceError, ElkcBaseError
from elkc.metrics import summarize
from elkc.quant3 import ErrorContext, QuantConfig
from elkc.tensor import DenseTensor, read_tensor, write_tensor
from elkc.utils import RngStream, median_runtime, named_rng

logger = stdlib_logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FORMAT = 2
EXIT_DIVERGENCE = 3


def exit_code_for(exc: BaseException) -> int:
    """Map an error to the process exit code.

    Args:
        exc: The raised error.

    Returns:
        1 for usage and configuration errors, 3 for divergence, 2 for other elkc errors.
    """
    if isinstance(exc, DivergenceError):
        return EXIT_DIVERGENCE
    if isinstance(exc, (ConfigError, click.ClickException, click.Abort)):
        return EXIT_USAGE
    return EXIT_FORMAT


class ExitCodeGroup(click.Group):
    """A command group exiting with elkc's exit codes instead of click's."""

    # click passes the parsing options through, the signature mirrors click.Group.main.
    def main(  # type: ignore[override]  # pylint: disable=arguments-differ
        self, *args: Any, standalone_mode: bool = True, **kwargs: Any
    ) -> int:
        """Run the group and translate errors into exit codes.

        Args:
            args: Positional arguments of click.Group.main.
            standalone_mode: Whether to exit the process with the exit code.
            kwargs: Keyword arguments of click.Group.main.

        Returns:
            The exit code, when not in standalone mode.
        """
        try:
            result = super().main(*args, standalone_mode=False, **kwargs)
            code = result if isinstance(result, int) else EXIT_OK
        except click.ClickException as exc:
            exc.show()
            code = EXIT_USAGE
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = EXIT_USAGE
        except ElkcBaseError as exc:
            logger.error("Command failed: %s", exc)
            click.echo(f"Error: {exc}", err=True)
            code = exit_code_for(exc)
        if standalone_mode:
            sys.exit(code)
        return code


def _render(template_name: str, **values: object) -> str:
    """Render a report template shipped with the package.

    Args:
        template_name: The template file name.
        values: The template variables.

    Returns:
        The report text.
    """
    env = jinja2.Environment(
        loader=jinja2.PackageLoader("elkc", "templates"),
        autoescape=jinja2.select_autoescape(),
        keep_trailing_newline=True,
    )
    return env.get_template(template_name).render(**values)


# The arguments are necessary input for click validation function.
def _validate_sparsity(
    ctx: click.Context, param: click.Parameter, value: float  # pylint: disable=unused-argument
) -> float:
    """Validate the sparsity multiplier.

    Args:
        ctx: Click context argument.
        param: Click parameter argument.
        value: The value passed into --s option.

    Raises:
        BadParameter: If the multiplier is outside [1, 2).

    Returns:
        The validated multiplier.
    """
    try:
        QuantConfig(s=value)
    except ConfigError as exc:
        raise click.BadParameter(str(exc)) from exc
    return value


# The arguments are necessary input for click validation function.
def _parse_codec(
    ctx: click.Context,  # pylint: disable=unused-argument
    param: click.Parameter,  # pylint: disable=unused-argument
    value: str | None,
) -> CodecKind | None:
    """Parse a codec specifier option.

    Args:
        ctx: Click context argument.
        param: Click parameter argument.
        value: The codec specifier.

    Raises:
        BadParameter: If the specifier is malformed.

    Returns:
        The codec kind.
    """
    if value is None:
        return None
    try:
        return CodecKind.from_str(value)
    except ConfigError as exc:
        raise click.BadParameter(str(exc)) from exc


# The arguments are necessary input for click validation function.
def _parse_shape(
    ctx: click.Context, param: click.Parameter, value: str  # pylint: disable=unused-argument
) -> tuple[int, ...]:
    """Parse an AxBxC shape option.

    Args:
        ctx: Click context argument.
        param: Click parameter argument.
        value: The shape string.

    Raises:
        BadParameter: If the shape is malformed.

    Returns:
        The dimensions.
    """
    try:
        dims = tuple(int(part) for part in value.lower().split("x"))
    except ValueError as exc:
        raise click.BadParameter("shape must be 'AxBxC' with positive integers") from exc
    if any(dim < 1 for dim in dims):
        raise click.BadParameter("shape must be 'AxBxC' with positive integers")
    return dims


@click.option(
    "--log-level",
    type=click.Choice(config.LOG_LEVELS),
    default="info",
    help="Configure logging verbosity.",
)
@click.group(cls=ExitCodeGroup)
def main(log_level: str | int) -> None:
    """Run entrypoint for elkc CLI.

    Args:
        log_level: The logging verbosity to apply.
    """
    logging.configure(log_level=log_level)


@main.command(name="compress")
@click.option(
    "--in",
    "in_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="The TSR1 tensor file to compress.",
)
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="The 3LC1 file to write.",
)
@click.option(
    "--s",
    "s",
    type=float,
    default=1.0,
    callback=_validate_sparsity,
    help="The sparsity multiplier, 1 <= s < 2. Larger values trade accuracy for size.",
)
@click.option("--no-zre", is_flag=True, default=False, help="Skip zero-run encoding.")
def compress(in_path: Path, out_path: Path, s: float, no_zre: bool) -> None:
    """Compress a tensor file with 3LC.

    File mode uses a fresh error accumulation context for every invocation; error
    accumulation only carries over between steps of a training loop.

    Args:
        in_path: The TSR1 tensor file.
        out_path: The 3LC1 destination.
        s: The sparsity multiplier.
        no_zre: Whether to skip zero-run encoding.
    """
    tensor = read_tensor(in_path)
    ctx = ErrorContext(tensor.dims, config=QuantConfig(s=s))
    compressed = blob.compress(ctx, tensor, use_zre=not no_zre)
    blob.write_blob(compressed, out_path)
    click.echo(f"{out_path}: ratio {blob.blob_ratio(compressed):.2f}x")


@main.command(name="decompress")
@click.option(
    "--in",
    "in_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="The 3LC1 file to decompress.",
)
@click.option(
    "--out",
    "out_path",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
    help="The TSR1 tensor file to write.",
)
def decompress(in_path: Path, out_path: Path) -> None:
    """Decompress a 3LC1 file of any codec into a tensor file.

    Args:
        in_path: The 3LC1 file.
        out_path: The TSR1 destination.
    """
    write_tensor(blob.decompress(blob.read_blob(in_path)), out_path)


def _bench_tensor(
    dims: tuple[int, ...], dist: config.Distribution, sparsity: float, seed: int
) -> DenseTensor:
    """Generate a benchmark tensor.

    Args:
        dims: The tensor shape.
        dist: The value distribution.
        sparsity: The zero probability of the sparse distribution.
        seed: The master seed.

    Returns:
        The tensor.
    """
    rng = named_rng(seed, RngStream.BENCH)
    size = math.prod(dims)
    if dist is config.Distribution.ZEROS:
        values = np.zeros(size, dtype=np.float32)
    else:
        values = rng.standard_normal(size, dtype=np.float32)
        if dist is config.Distribution.SPARSE_GAUSSIAN:
            values[rng.random(size) < sparsity] = 0.0
    return DenseTensor(dims=dims, data=values)


@main.command(name="bench")
@click.option(
    "--codec",
    "codec",
    default="3lc",
    callback=_parse_codec,
    help="The codec specifier: float32, 3lc[:s][:no-zre], int8, stoch3, mqe1, topk:fraction "
    "or local-steps:n.",
)
@click.option(
    "--shape", default="1000000", callback=_parse_shape, help="The tensor shape as AxBxC."
)
@click.option(
    "--dist",
    type=click.Choice([dist.value for dist in config.Distribution]),
    default=config.Distribution.GAUSSIAN.value,
    help="The value distribution of the generated tensor.",
)
@click.option(
    "--sparsity",
    type=click.FloatRange(0.0, 1.0),
    default=0.9,
    help="The zero probability of the sparse-gaussian distribution.",
)
@click.option("--iters", type=click.IntRange(min=1), default=5, help="Timed runs per codec.")
@click.option(
    "--seed",
    type=click.IntRange(min=0),
    envvar=config.SEED_ENV,
    default=config.DEFAULT_SEED,
    help="The master seed; falls back to ELKC_SEED.",
)
# click doesn't yet support dataclasses, hence all arguments are required.
def bench(  # pylint: disable=too-many-arguments, too-many-positional-arguments
    codec: CodecKind,
    shape: tuple[int, ...],
    dist: str,
    sparsity: float,
    iters: int,
    seed: int,
) -> None:
    """Report compressed size and throughput of a codec on a generated tensor.

    Args:
        codec: The codec kind.
        shape: The tensor shape.
        dist: The value distribution name.
        sparsity: The zero probability of the sparse distribution.
        iters: Timed runs.
        seed: The master seed.
    """
    distribution = config.Distribution.from_str(dist)
    tensor = _bench_tensor(shape, distribution, sparsity, seed)
    # the final step of a period, so local steps emit
    step = codec.local_steps - 1 if codec.name is CodecName.LOCAL_STEPS else 0

    def compress_once() -> blob.CompressedBlob:
        """Compress the tensor through a fresh context.

        Returns:
            The blob.
        """
        ctx = blob.new_context(codec, tensor.dims, named_rng(seed, RngStream.CODEC))
        compressed = blob.compress_with(codec, ctx, tensor, step)
        assert compressed is not None  # nosec: B101
        return compressed

    compressed = compress_once()
    compress_seconds = median_runtime(compress_once, iters)
    decompress_seconds = median_runtime(lambda: blob.decompress(compressed), iters)
    summary = summarize([compressed])
    logger.info("Benchmarked %s on %s %s tensor.", codec, shape, distribution.value)
    click.echo(
        _render(
            "bench.txt.j2",
            CODEC=str(codec),
            SHAPE="x".join(str(dim) for dim in shape),
            DISTRIBUTION=distribution.value,
            VALUES=tensor.size,
            PAYLOAD_BYTES=compressed.payload_len,
            HEADER_BYTES=compressed.header_len,
            BITS_PER_VALUE=summary.bits_per_value,
            GROSS_BITS_PER_VALUE=summary.gross_bits_per_value,
            RATIO=summary.ratio,
            COMPRESS_SECONDS=compress_seconds,
            COMPRESS_THROUGHPUT=_throughput(tensor.size, compress_seconds),
            DECOMPRESS_SECONDS=decompress_seconds,
            DECOMPRESS_THROUGHPUT=_throughput(tensor.size, decompress_seconds),
            ITERS=iters,
        ),
        nl=False,
    )


def _throughput(values: int, seconds: float) -> float:
    """Get values processed per second.

    Args:
        values: The value count.
        seconds: The duration.

    Returns:
        The throughput, infinite for a zero duration.
    """
    return values / seconds if seconds > 0 else math.inf


@main.command(name="train-sim")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="A key=value file of simulator settings.",
)
@click.option("--workers", type=int, default=None, help="Override the worker count.")
@click.option("--steps", type=int, default=None, help="Override the step count.")
@click.option("--push-codec", default=None, help="Override the push codec specifier.")
@click.option("--pull-codec", default=None, help="Override the pull codec specifier.")
@click.option("--seed", type=int, default=None, help="Override the seed; falls back to ELKC_SEED.")
@click.option("--threads", type=int, default=None, help="Override the worker thread count.")
@click.option(
    "--csv-out",
    type=click.File("w", encoding="utf-8"),
    default="-",
    help="Where to write the per-step CSV, stdout by default.",
)
# click doesn't yet support dataclasses, hence all arguments are required.
def train_sim(  # pylint: disable=too-many-arguments, too-many-positional-arguments
    config_path: Path | None,
    workers: int | None,
    steps: int | None,
    push_codec: str | None,
    pull_codec: str | None,
    seed: int | None,
    threads: int | None,
    csv_out: TextIO,
) -> None:
    """Run the parameter-server training simulator and write its metrics as CSV.

    Command line options override the configuration file, which overrides ELKC_SEED.

    Args:
        config_path: The key=value settings file.
        workers: The worker count override.
        steps: The step count override.
        push_codec: The push codec override.
        pull_codec: The pull codec override.
        seed: The seed override.
        threads: The worker thread count override.
        csv_out: The CSV destination.
    """
    settings = config.read_key_value_file(config_path) if config_path else {}
    if "seed" not in settings and config.SEED_ENV in os.environ:
        settings["seed"] = os.environ[config.SEED_ENV]
    overrides = {
        "workers": workers,
        "steps": steps,
        "push_codec": push_codec,
        "pull_codec": pull_codec,
        "seed": seed,
        "threads": threads,
    }
    settings.update({key: value for key, value in overrides.items() if value is not None})
    cfg = psim.SimConfig.from_mapping(settings)
    psim.run(cfg).write_csv(csv_out)


@main.command(name="stats")
@click.argument("blob_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
def stats(blob_path: Path) -> None:
    # Click arguments do not take help parameter, display help through docstrings.
    """Print the header and traffic summary of <blob_path>.

    Args:
        blob_path: The 3LC1 file.
    """
    compressed = blob.read_blob(blob_path)
    summary = summarize([compressed])
    zero_fraction = None
    if compressed.codec_id in blob.TERNARY_CODECS:
        values = blob.decode_ternary(compressed).values
        zero_fraction = float(np.mean(values == 0))
    click.echo(
        _render(
            "stats.txt.j2",
            PATH=str(blob_path),
            CODEC=compressed.codec_id.name.lower(),
            CODEC_ID=int(compressed.codec_id),
            VERSION=compressed.version,
            ZRE=compressed.zre,
            DIMS="x".join(str(dim) for dim in compressed.dims) or "scalar",
            VALUES=compressed.size,
            M=compressed.m,
            PAYLOAD_BYTES=compressed.payload_len,
            HEADER_BYTES=compressed.header_len,
            BITS_PER_VALUE=summary.bits_per_value,
            GROSS_BITS_PER_VALUE=summary.gross_bits_per_value,
            RATIO=summary.ratio,
            ZERO_FRACTION=zero_fraction,
        ),
        nl=False,
    )
