"""Paired and unpaired datasets, RGBD assembly, side-by-side format, and batching.

Datasets are immutable once loaded. Batch order is a pure function of (seed, epoch):
each epoch draws its permutation from ``numpy.random.default_rng([seed, epoch, stream])``
so source and target streams never share a generator.
"""

import logging
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from uwtranslate.core.types import DomainTag, ImageTensor, denormalize, normalize
from uwtranslate.data.image_io import list_rasters, read_raster, resize_raster, write_raster
from uwtranslate.data.manifest import (
    ROLE_ALIGNED,
    ROLE_DEPTH,
    ROLE_UNDERWATER,
    ROLE_UNIFORM_LIGHTING,
    DatasetManifest,
    sequence_id,
)
from uwtranslate.errors import DataError

logger = logging.getLogger(__name__)

SOURCE_STREAM = 0
TARGET_STREAM = 1
TARGET_RESAMPLE_STREAM = 2


@dataclass(frozen=True)
class PairedExample:
    """Pixel-aligned training example (x uniform lighting, y underwater)."""

    x: ImageTensor
    y: ImageTensor
    scene_id: str

    def __post_init__(self) -> None:
        if (self.x.height, self.x.width) != (self.y.height, self.y.width):
            raise DataError(
                f"scene {self.scene_id}: x is {self.x.height}x{self.x.width} "
                f"but y is {self.y.height}x{self.y.width}"
            )


@dataclass(frozen=True)
class UnpairedDataset:
    """Independent source and target image sets."""

    source: tuple[ImageTensor, ...]
    target: tuple[ImageTensor, ...]
    source_ids: tuple[str, ...]
    target_ids: tuple[str, ...]
    overlapping: bool = False
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if len(self.source) != len(self.source_ids) or len(self.target) != len(self.target_ids):
            raise DataError("UnpairedDataset ids must align with their images")

    @property
    def source_has_depth(self) -> bool:
        return bool(self.source) and self.source[0].has_depth

    @property
    def target_has_depth(self) -> bool:
        return bool(self.target) and self.target[0].has_depth


@dataclass(frozen=True)
class Batch:
    """One training batch; x and y are (B, C, H, W) tensors."""

    x: torch.Tensor
    y: torch.Tensor
    x_ids: tuple[str, ...]
    y_ids: tuple[str, ...]
    epoch: int
    index: int


def load_image(path: Path, size: int, domain: DomainTag | None = None) -> ImageTensor:
    """Read an RGB raster, resize bilinearly, and normalize to [-1, 1]."""
    array, value_range = read_raster(path)
    if value_range is None:
        raise DataError(f"{path}: floating-point rasters need an explicit range; only depth may be float")
    if array.ndim == 2:
        array = np.repeat(array[:, :, None], 3, axis=2)
    return normalize(resize_raster(array, size), value_range, domain)


def load_depth(path: Path, size: int, depth_range: tuple[float, float]) -> ImageTensor:
    """Read a depth raster, resize with nearest neighbour, normalize with the dataset range."""
    array, _ = read_raster(path)
    if array.ndim == 3:
        array = array[:, :, 0]
    return normalize(resize_raster(array, size, nearest=True), depth_range)


def assemble_rgbd(rgb: ImageTensor, depth: ImageTensor) -> ImageTensor:
    """Stack an RGB image and its depth plane into a 4-channel input.

    Raises:
        DataError: If the channel counts or spatial shapes disagree.
    """
    if rgb.channels != 3 or depth.channels != 1:
        raise DataError(f"assemble_rgbd expects 3 + 1 channels, got {rgb.channels} + {depth.channels}")
    if (rgb.height, rgb.width) != (depth.height, depth.width):
        raise DataError(
            f"depth plane is {depth.height}x{depth.width} but rgb is {rgb.height}x{rgb.width}"
        )
    return ImageTensor(torch.cat([rgb.data, depth.data], dim=0), rgb.domain)


def concat_side_by_side(x: ImageTensor, y: ImageTensor) -> ImageTensor:
    """Concatenate two images horizontally (pix2pix aligned format)."""
    if x.height != y.height or x.channels != y.channels:
        raise DataError(
            f"side-by-side needs equal height and channels, got {x.channels}x{x.height} and {y.channels}x{y.height}"
        )
    return ImageTensor(torch.cat([x.data, y.data], dim=2))


def split_side_by_side(image: ImageTensor) -> tuple[ImageTensor, ImageTensor]:
    """Split an aligned image back into its left and right halves."""
    if image.width % 2 != 0:
        raise DataError(f"side-by-side image width must be even, got {image.width}")
    half = image.width // 2
    return ImageTensor(image.data[:, :, :half]), ImageTensor(image.data[:, :, half:])


def _map(fn, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _index_by_key(manifest: DatasetManifest, files: list[Path]) -> dict[str, Path]:
    index: dict[str, Path] = {}
    for path in files:
        key = manifest.match_key(path)
        if key in index:
            raise DataError(f"duplicate scene key {key!r}: {index[key].name} and {path.name}")
        index[key] = path
    return index


def _sort_key(manifest: DatasetManifest, key: str) -> tuple:
    return (int(key), key) if manifest.matcher == "numeric_suffix" else (0, key)


def _depth_files(manifest: DatasetManifest, keys: Sequence[str], what: str) -> dict[str, Path]:
    manifest.ensure_roles(ROLE_DEPTH)
    depth_index = _index_by_key(manifest, manifest.list_files(ROLE_DEPTH))
    missing = [k for k in keys if k not in depth_index]
    if missing:
        raise DataError(f"{what}: missing depth files for {len(missing)} scenes: {', '.join(missing[:10])}")
    return depth_index


def load_paired(manifest: DatasetManifest, with_depth: bool = False, workers: int = 4) -> list[PairedExample]:
    """Load matched uniform-lighting / underwater pairs.

    Args:
        manifest: Dataset layout.
        with_depth: Append the depth plane to every x.
        workers: Decoder threads.

    Returns:
        One PairedExample per matched name, sorted by scene id.

    Raises:
        DataError: If any file has no counterpart (all offenders are listed).
    """
    manifest.ensure_roles(ROLE_UNIFORM_LIGHTING, ROLE_UNDERWATER)
    x_index = _index_by_key(manifest, manifest.list_files(ROLE_UNIFORM_LIGHTING))
    y_index = _index_by_key(manifest, manifest.list_files(ROLE_UNDERWATER))

    only_x = sorted(x_index.keys() - y_index.keys())
    only_y = sorted(y_index.keys() - x_index.keys())
    if only_x or only_y:
        offenders = [f"{x_index[k].name} (no underwater match)" for k in only_x]
        offenders += [f"{y_index[k].name} (no uniform-lighting match)" for k in only_y]
        raise DataError("unmatched files in paired dataset: " + ", ".join(offenders))

    keys = sorted(x_index, key=lambda k: _sort_key(manifest, k))
    depth_index = _depth_files(manifest, keys, "paired dataset") if with_depth else {}
    size = manifest.image_size

    def load(key: str) -> PairedExample:
        x = load_image(x_index[key], size, DomainTag.SOURCE_UNIFORM_LIGHTING)
        if with_depth:
            x = assemble_rgbd(x, load_depth(depth_index[key], size, manifest.depth_range))
        y = load_image(y_index[key], size, DomainTag.TARGET_UNDERWATER)
        return PairedExample(x=x, y=y, scene_id=x_index[key].stem)

    examples = _map(load, keys, workers)
    logger.info("Loaded %d paired examples from %s", len(examples), manifest.root)
    return examples


def load_side_by_side(manifest: DatasetManifest, workers: int = 4) -> list[PairedExample]:
    """Load an aligned folder where every file holds x (left) and y (right)."""
    manifest.ensure_roles(ROLE_ALIGNED)
    size = manifest.image_size

    def load(path: Path) -> PairedExample:
        array, value_range = read_raster(path)
        if array.ndim == 2:
            array = np.repeat(array[:, :, None], 3, axis=2)
        if array.shape[1] % 2 != 0:
            raise DataError(f"{path.name}: side-by-side width must be even, got {array.shape[1]}")
        half = array.shape[1] // 2
        x = normalize(resize_raster(array[:, :half], size), value_range, DomainTag.SOURCE_UNIFORM_LIGHTING)
        y = normalize(resize_raster(array[:, half:], size), value_range, DomainTag.TARGET_UNDERWATER)
        return PairedExample(x=x, y=y, scene_id=path.stem)

    return _map(load, manifest.list_files(ROLE_ALIGNED), workers)


def write_side_by_side(examples: Sequence[PairedExample], out_dir: Path) -> list[Path]:
    """Write every pair as one concatenated 8-bit PNG named after its scene."""
    written = []
    for example in examples:
        joined = concat_side_by_side(example.x.rgb, example.y.rgb)
        path = out_dir / f"{example.scene_id}.png"
        write_raster(path, denormalize(joined))
        written.append(path)
    return written


def _files_in_range(manifest: DatasetManifest, role: str, id_range: tuple[int, int]) -> list[Path]:
    lo, hi = id_range
    selected = [p for p in manifest.list_files(role) if lo <= sequence_id(p) < hi]
    return sorted(selected, key=sequence_id)


def build_unpaired_split(
    manifest: DatasetManifest,
    source_range: tuple[int, int],
    target_range: tuple[int, int],
    with_depth: bool = False,
    target_depth: bool = False,
    workers: int = 4,
) -> UnpairedDataset:
    """Select source and target images by half-open sequence id ranges.

    Args:
        manifest: Dataset layout.
        source_range: [lo, hi) of uniform-lighting sequence ids.
        target_range: [lo, hi) of underwater sequence ids.
        with_depth: Assemble RGBD source images (required by CUT + depth).
        target_depth: Also attach depth to target images when the depth folder covers them.
        workers: Decoder threads.

    Raises:
        DataError: If a range is empty or selects no files, or required depth is missing.
    """
    for name, (lo, hi) in (("source", source_range), ("target", target_range)):
        if hi <= lo:
            raise DataError(f"{name} range [{lo}, {hi}) is empty")
    manifest.ensure_roles(ROLE_UNIFORM_LIGHTING, ROLE_UNDERWATER)

    warnings: list[str] = []
    overlapping = source_range[0] < target_range[1] and target_range[0] < source_range[1]
    if overlapping:
        message = (
            f"source range {list(source_range)} overlaps target range {list(target_range)}; "
            "scenes may appear in both domains"
        )
        logger.warning(message)
        warnings.append(message)

    source_files = _files_in_range(manifest, ROLE_UNIFORM_LIGHTING, source_range)
    target_files = _files_in_range(manifest, ROLE_UNDERWATER, target_range)
    if not source_files:
        raise DataError(f"source range {list(source_range)} selects no uniform-lighting files")
    if not target_files:
        raise DataError(f"target range {list(target_range)} selects no underwater files")

    size = manifest.image_size
    depth_index: dict[str, Path] = {}
    if with_depth:
        depth_index = _depth_files(manifest, [manifest.match_key(p) for p in source_files], "source domain")

    attach_target_depth = False
    if target_depth and manifest.has_role(ROLE_DEPTH):
        try:
            depth_index = {
                **depth_index,
                **_depth_files(manifest, [manifest.match_key(p) for p in target_files], "target domain"),
            }
            attach_target_depth = True
        except DataError as e:
            warnings.append(f"target depth unavailable: {e}")
    elif target_depth:
        warnings.append("target depth requested but the manifest has no depth folder")

    def load_source(path: Path) -> ImageTensor:
        image = load_image(path, size, DomainTag.SOURCE_UNIFORM_LIGHTING)
        if with_depth:
            depth = load_depth(depth_index[manifest.match_key(path)], size, manifest.depth_range)
            image = assemble_rgbd(image, depth)
        return image

    def load_target(path: Path) -> ImageTensor:
        image = load_image(path, size, DomainTag.TARGET_UNDERWATER)
        if attach_target_depth:
            depth = load_depth(depth_index[manifest.match_key(path)], size, manifest.depth_range)
            image = assemble_rgbd(image, depth)
        return image

    dataset = UnpairedDataset(
        source=tuple(_map(load_source, source_files, workers)),
        target=tuple(_map(load_target, target_files, workers)),
        source_ids=tuple(p.stem for p in source_files),
        target_ids=tuple(p.stem for p in target_files),
        overlapping=overlapping,
        warnings=tuple(warnings),
    )
    logger.info(
        "Unpaired split: %d source / %d target images (overlap=%s)",
        len(dataset.source),
        len(dataset.target),
        overlapping,
    )
    return dataset


def load_folder(
    folder: Path,
    size: int,
    depth_folder: Path | None = None,
    depth_range: tuple[float, float] | None = None,
) -> list[tuple[str, ImageTensor]]:
    """Load every raster of a folder (optionally with depth matched by basename)."""
    if not folder.is_dir():
        raise DataError(f"input folder does not exist: {folder}")
    files = list_rasters(folder)
    if not files:
        raise DataError(f"input folder is empty: {folder}")
    depth_by_stem = {p.stem: p for p in list_rasters(depth_folder)} if depth_folder is not None else {}
    loaded = []
    for path in files:
        image = load_image(path, size, DomainTag.SOURCE_UNIFORM_LIGHTING)
        if depth_folder is not None:
            if path.stem not in depth_by_stem:
                raise DataError(f"no depth file for {path.name} in {depth_folder}")
            image = assemble_rgbd(image, load_depth(depth_by_stem[path.stem], size, depth_range or (0.0, 65535.0)))
        loaded.append((path.stem, image))
    return loaded


def epoch_permutation(n: int, seed: int, epoch: int, stream: int = SOURCE_STREAM) -> np.ndarray:
    """Deterministic permutation of range(n) for one (seed, epoch, stream)."""
    return np.random.default_rng([seed, epoch, stream]).permutation(n)


def batches_per_epoch(dataset: Sequence[PairedExample] | UnpairedDataset, batch_size: int) -> int:
    """Number of full batches in one epoch (drop-last; unpaired epochs follow the source set)."""
    n = len(dataset.source) if isinstance(dataset, UnpairedDataset) else len(dataset)
    return n // batch_size


def target_indices(n_target: int, needed: int, seed: int, epoch: int) -> np.ndarray:
    """Target order for one epoch; tops up with replacement when the source set is larger."""
    order = epoch_permutation(n_target, seed, epoch, TARGET_STREAM)
    if needed <= n_target:
        return order[:needed]
    extra = np.random.default_rng([seed, epoch, TARGET_RESAMPLE_STREAM]).integers(0, n_target, needed - n_target)
    return np.concatenate([order, extra])


def _stack(images: Sequence[ImageTensor]) -> torch.Tensor:
    return torch.stack([img.data for img in images], dim=0)


def iterate_batches(
    dataset: Sequence[PairedExample] | UnpairedDataset,
    batch_size: int,
    seed: int,
    paired: bool,
    epoch: int = 0,
) -> Iterator[Batch]:
    """Yield the batches of one epoch.

    Paired mode keeps (x, y) aligned. Unpaired mode shuffles source and target with
    independent generators; an epoch is one pass over the source set and the target
    set is resampled with replacement when it is smaller.

    Raises:
        DataError: If batch_size is < 1 or larger than the dataset.
    """
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")

    if paired:
        if isinstance(dataset, UnpairedDataset):
            raise DataError("paired iteration needs a list of PairedExample")
        n = len(dataset)
        if batch_size > n:
            raise DataError(f"batch_size {batch_size} exceeds dataset size {n}")
        order = epoch_permutation(n, seed, epoch)
        for b in range(n // batch_size):
            chunk = [dataset[i] for i in order[b * batch_size : (b + 1) * batch_size]]
            yield Batch(
                x=_stack([e.x for e in chunk]),
                y=_stack([e.y for e in chunk]),
                x_ids=tuple(e.scene_id for e in chunk),
                y_ids=tuple(e.scene_id for e in chunk),
                epoch=epoch,
                index=b,
            )
        return

    if not isinstance(dataset, UnpairedDataset):
        raise DataError("unpaired iteration needs an UnpairedDataset")
    n_source, n_target = len(dataset.source), len(dataset.target)
    if batch_size > n_source or batch_size > n_target:
        raise DataError(f"batch_size {batch_size} exceeds dataset size (source {n_source}, target {n_target})")
    n_batches = n_source // batch_size
    source_order = epoch_permutation(n_source, seed, epoch, SOURCE_STREAM)
    target_order = target_indices(n_target, n_batches * batch_size, seed, epoch)
    for b in range(n_batches):
        src = source_order[b * batch_size : (b + 1) * batch_size]
        tgt = target_order[b * batch_size : (b + 1) * batch_size]
        yield Batch(
            x=_stack([dataset.source[i] for i in src]),
            y=_stack([dataset.target[i] for i in tgt]),
            x_ids=tuple(dataset.source_ids[i] for i in src),
            y_ids=tuple(dataset.target_ids[i] for i in tgt),
            epoch=epoch,
            index=b,
        )
