"""CLI entry point for uwtranslate.

Provides the ``uwt`` command group: train a translator from a YAML run config, translate
a folder of uniform-lighting renders, evaluate checkpoints with SSIM and FID, and render
per-layer activation and weight grids.
"""

import functools
import logging
import shutil
from collections.abc import Callable
from pathlib import Path
from typing import Any

import click

from uwtranslate import __version__
from uwtranslate.core.types import Method, denormalize
from uwtranslate.data.image_io import write_raster
from uwtranslate.data.manifest import ROLE_UNIFORM_LIGHTING, DatasetManifest
from uwtranslate.data.pipeline import (
    PairedExample,
    UnpairedDataset,
    assemble_rgbd,
    build_unpaired_split,
    load_depth,
    load_folder,
    load_image,
    load_paired,
    load_side_by_side,
)
from uwtranslate.engine.checkpoint import load_checkpoint, load_translator
from uwtranslate.engine.metrics_logger import MetricsLogger
from uwtranslate.engine.trainers import make_trainer
from uwtranslate.errors import CheckpointError, ConfigError, DataError, UwtError
from uwtranslate.evaluation.evaluator import (
    IDENTITY_NAME,
    MetricsReport,
    evaluate_checkpoint,
    evaluate_translator,
    failed_rows,
    identity_translate,
    load_test_set,
    resolve_subsets,
    translate_images,
)
from uwtranslate.evaluation.extractors import build_extractor
from uwtranslate.evaluation.report_writer import ReportWriter
from uwtranslate.networks.inspect import list_layers
from uwtranslate.parser.config_parser import RunConfig, YamlConfigParser, write_resolved_config
from uwtranslate.parser.manifest_parser import parse_manifest
from uwtranslate.visualize import visualize_layers

RESOLVED_CONFIG_FILE = "resolved_config.yaml"
METRICS_FILE = "metrics.csv"


def _exit_on_error(func: Callable[..., Any]) -> Callable[..., Any]:
    """Report UwtError subclasses on stderr and exit with their exit code."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except UwtError as e:
            click.echo(f"Error: {e}", err=True)
            raise click.exceptions.Exit(e.exit_code) from e

    return wrapper


def _prepare_output(output_dir: Path, overwrite: bool) -> None:
    if output_dir.exists() and not output_dir.is_dir():
        raise ConfigError(f"--out {output_dir} exists and is not a directory")
    if output_dir.exists() and any(output_dir.iterdir()):
        if not overwrite:
            raise ConfigError(f"output directory {output_dir} is not empty; pass --overwrite to replace it")
        if Path.cwd().resolve().is_relative_to(output_dir.resolve()):
            raise ConfigError(f"refusing to replace {output_dir}: it contains the working directory")
        shutil.rmtree(output_dir)


def _manifest(path: Path, field: str, image_size: int | None = None) -> DatasetManifest:
    try:
        return parse_manifest(path, image_size=image_size)
    except ConfigError as e:
        raise ConfigError(f"{field}: {e}") from e


def _training_data(run: RunConfig, manifest: DatasetManifest) -> list[PairedExample] | UnpairedDataset:
    cfg, data = run.train, run.data
    if cfg.method.paired:
        if data.side_by_side:
            return load_side_by_side(manifest, workers=data.workers)
        return load_paired(manifest, workers=data.workers)
    use_depth = cfg.method is Method.CUT_DEPTH
    return build_unpaired_split(
        manifest,
        data.source_range,
        data.target_range,
        with_depth=use_depth,
        target_depth=use_depth and cfg.target_depth,
        workers=data.workers,
    )


@click.group()
@click.version_option(version=__version__, prog_name="uwt")
@click.option("-v", "--verbose", count=True, help="Log INFO messages (-vv for DEBUG).")
def main(verbose: int) -> None:
    """Underwater image translation - train, translate, evaluate and inspect translators."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("-c", "--config", "config_file", required=True, type=click.Path(path_type=Path), help="Run config YAML.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override a config value.")
@click.option("-o", "--out", "output_dir", required=True, type=click.Path(path_type=Path), help="Run directory.")
@click.option("--overwrite", is_flag=True, help="Replace a non-empty run directory.")
@click.option("--seed", type=int, default=None, help="Override train.seed.")
@click.option("--deterministic", is_flag=True, help="Deterministic math mode.")
@click.option(
    "--resume",
    type=click.Path(path_type=Path),
    default=None,
    help="Checkpoint directory to continue from; the run directory may already exist.",
)
@click.option("--device", default=None, help="Torch device (default: cuda when available).")
@_exit_on_error
def train(
    config_file: Path,
    overrides: tuple[str, ...],
    output_dir: Path,
    overwrite: bool,
    seed: int | None,
    deterministic: bool,
    resume: Path | None,
    device: str | None,
) -> None:
    """Train a translator from a YAML run config."""
    click.echo(f"Loading run config {config_file}...")
    run = YamlConfigParser().parse_file(config_file, overrides, seed=seed, deterministic=deterministic)
    cfg = run.train
    if run.data.manifest is None:
        raise ConfigError("data.manifest is required for training")
    manifest = _manifest(run.data.manifest, "data.manifest", image_size=cfg.image_size)
    if resume is None:
        _prepare_output(output_dir, overwrite)
    elif not resume.is_dir():
        raise CheckpointError(f"--resume {resume} is not a checkpoint directory")

    click.echo(f"Method: {cfg.method.value} (recipe: {run.recipe or 'none'}), seed {cfg.seed}")
    dataset = _training_data(run, manifest)
    for warning in getattr(dataset, "warnings", ()):
        click.echo(f"Warning: {warning}", err=True)

    output_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(run, output_dir / RESOLVED_CONFIG_FILE)

    with MetricsLogger(
        sinks=("stdout", "csv_file"),
        csv_path=output_dir / METRICS_FILE,
        flush_interval=cfg.log_flush_interval,
    ) as metrics:
        trainer = make_trainer(
            cfg, out_dir=output_dir, metrics=metrics, depth_range=manifest.depth_range, device=device
        )
        if resume is not None:
            trainer.restore(load_checkpoint(resume, expected=cfg))
            click.echo(f"Resuming at epoch {trainer.epoch}, step {trainer.global_step}")
        state = trainer.fit(dataset)

    for warning in trainer.warnings:
        click.echo(f"Warning: {warning}", err=True)
    if trainer.history:
        last = ", ".join(f"{k}={v:.4f}" for k, v in trainer.history[-1].items())
        click.echo(f"Final step: {last}")
    click.echo(f"Trained {state.global_step} steps ({state.epoch} complete epochs)")
    click.echo(f"Checkpoint: {trainer.last_checkpoint}")
    click.echo("Training complete!")


@main.command()
@click.argument("checkpoint", type=click.Path(path_type=Path))
@click.argument("input_dir", type=click.Path(path_type=Path))
@click.option("-o", "--out", "output_dir", required=True, type=click.Path(path_type=Path), help="Output folder.")
@click.option("--depth-dir", type=click.Path(path_type=Path), default=None, help="Depth rasters for RGBD checkpoints.")
@click.option("--overwrite", is_flag=True, help="Replace a non-empty output folder.")
@click.option("--batch-size", type=int, default=8, show_default=True)
@_exit_on_error
def translate(
    checkpoint: Path,
    input_dir: Path,
    output_dir: Path,
    depth_dir: Path | None,
    overwrite: bool,
    batch_size: int,
) -> None:
    """Translate every image of INPUT_DIR with the translator stored in CHECKPOINT."""
    translator = load_translator(checkpoint)
    click.echo(f"Loaded {translator.method.value} translator ({translator.in_channels}-channel input)")
    if translator.in_channels == 4 and depth_dir is None:
        raise CheckpointError(
            f"{checkpoint} consumes RGB + depth input but no depth was given; "
            "pass --depth-dir with one depth raster per input (matched by file name)"
        )
    if translator.in_channels == 3 and depth_dir is not None:
        raise CheckpointError(f"{checkpoint} consumes RGB input only; drop --depth-dir or use an RGBD checkpoint")
    _prepare_output(output_dir, overwrite)

    loaded = load_folder(input_dir, translator.image_size, depth_dir, translator.depth_range)
    outputs = translate_images(translator, [image for _, image in loaded], batch_size)
    output_dir.mkdir(parents=True, exist_ok=True)
    for (name, _), image in zip(loaded, outputs):
        write_raster(output_dir / f"{name}.png", denormalize(image))

    click.echo(f"Wrote {len(outputs)} images to {output_dir}")


def _checkpoint_arg(text: str) -> tuple[str | None, Path]:
    label, sep, path = text.partition("=")
    if sep and label and "/" not in label:
        return label, Path(path)
    return None, Path(text)


@main.command()
@click.argument("checkpoints", nargs=-1)
@click.option(
    "-m", "--manifest", "manifest_file", required=True, type=click.Path(path_type=Path), help="Test manifest."
)
@click.option("--subset", "subset_specs", multiple=True, metavar="NAME=SPEC", help="all | random:K | id1,id2 | @file")
@click.option("--identity-baseline", is_flag=True, help="Also score the untranslated inputs.")
@click.option("--extractor-weights", type=click.Path(path_type=Path), default=None, help="Inception-v3 weights file.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for random subsets and projections.")
@click.option("-o", "--out", "output_dir", required=True, type=click.Path(path_type=Path), help="Report folder.")
@click.option("--overwrite", is_flag=True, help="Replace a non-empty report folder.")
@click.option("--batch-size", type=int, default=8, show_default=True)
@_exit_on_error
def evaluate(
    checkpoints: tuple[str, ...],
    manifest_file: Path,
    subset_specs: tuple[str, ...],
    identity_baseline: bool,
    extractor_weights: Path | None,
    seed: int,
    output_dir: Path,
    overwrite: bool,
    batch_size: int,
) -> None:
    """Score checkpoints (PATH or LABEL=PATH) on a test set with SSIM and FID."""
    if not checkpoints and not identity_baseline:
        raise ConfigError("give at least one checkpoint or --identity-baseline")
    entries = [_checkpoint_arg(arg) for arg in checkpoints]
    labels = [label for label, _ in entries if label]
    if len(labels) != len(set(labels)):
        raise ConfigError(f"duplicate method labels in {labels}")
    _prepare_output(output_dir, overwrite)

    manifest = _manifest(manifest_file, "--manifest")
    manifest.ensure_roles(ROLE_UNIFORM_LIGHTING)
    available = [manifest.match_key(p) for p in manifest.list_files(ROLE_UNIFORM_LIGHTING)]
    subsets = resolve_subsets(subset_specs, available, seed=seed)
    extractor = build_extractor(extractor_weights, seed=seed)
    click.echo(f"Subsets: {', '.join(f'{name} (n={len(ids)})' for name, ids in subsets)}; features: {extractor.name}")

    report = MetricsReport(extractor=extractor.name)
    for label, path in entries:
        try:
            report.extend(evaluate_checkpoint(path, manifest, subsets, extractor, name=label, batch_size=batch_size))
        except (CheckpointError, DataError) as e:
            click.echo(f"Error: {path}: {e}", err=True)
            report.extend(failed_rows(label or path.name, subsets, e))
    if identity_baseline:
        test_set = load_test_set(manifest, manifest.image_size)
        report.extend(evaluate_translator(identity_translate, IDENTITY_NAME, test_set, subsets, extractor, batch_size))

    writer = ReportWriter()
    for path in writer.write_files(report, output_dir):
        click.echo(f"Report: {path}")
    click.echo("")
    click.echo(writer.generate_table(report))

    if report.failed:
        failed = sorted({row.method for row in report.failed})
        click.echo(f"Evaluation incomplete: {len(failed)} checkpoint(s) failed: {', '.join(failed)}", err=True)
        raise click.exceptions.Exit(1)


@main.command()
@click.argument("checkpoint", type=click.Path(path_type=Path))
@click.argument("image", type=click.Path(path_type=Path), required=False)
@click.option("-l", "--layer", "layer_ids", multiple=True, type=int, help="Layer id (repeatable).")
@click.option("--depth", "depth_file", type=click.Path(path_type=Path), default=None, help="Depth raster for RGBD.")
@click.option("-o", "--out", "output_dir", type=click.Path(path_type=Path), default=None, help="Grid folder.")
@click.option("--overwrite", is_flag=True, help="Replace a non-empty grid folder.")
@_exit_on_error
def visualize(
    checkpoint: Path,
    image: Path | None,
    layer_ids: tuple[int, ...],
    depth_file: Path | None,
    output_dir: Path | None,
    overwrite: bool,
) -> None:
    """Write activation and weight grids of a translator's layers for IMAGE.

    Without --layer, lists the layer ids of the translator.
    """
    translator = load_translator(checkpoint)
    if not layer_ids:
        layers = list_layers(translator.network)
        click.echo(f"{translator.method.value} translator ({len(layers)} layers)")
        for layer_id, (name, module) in enumerate(layers):
            click.echo(f"  {layer_id:3d}  {name:<40} {type(module).__name__}")
        return
    if image is None or output_dir is None:
        raise ConfigError("IMAGE and --out are required when --layer is given")
    _prepare_output(output_dir, overwrite)

    tensor = load_image(image, translator.image_size)
    if depth_file is not None:
        depth = load_depth(depth_file, translator.image_size, translator.depth_range or (0.0, 65535.0))
        tensor = assemble_rgbd(tensor, depth)
    written = visualize_layers(translator, tensor, layer_ids, output_dir)
    for path in written:
        click.echo(f"  {path}")
    click.echo(f"Wrote {len(written)} grids for {len(layer_ids)} layers")


if __name__ == "__main__":
    main()
