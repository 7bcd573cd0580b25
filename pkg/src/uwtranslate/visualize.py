"""Activation and weight grids of a trained translator.

Every requested layer produces ``layer_<id>_activation.png`` (one tile per channel) and,
when a convolution feeds the layer, ``layer_<id>_weights.png`` (one tile per filter).
Tiles are laid out in ``ceil(sqrt(n))`` columns.
"""

import logging
import math
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from torchvision.utils import make_grid

from uwtranslate.core.types import ImageTensor
from uwtranslate.data.image_io import write_raster
from uwtranslate.engine.checkpoint import LoadedTranslator
from uwtranslate.errors import CheckpointError
from uwtranslate.networks.inspect import LayerCapture, capture_layer_activations

logger = logging.getLogger(__name__)

MIN_KERNEL_TILE = 28
TILE_PADDING = 1


def grid_shape(n: int) -> tuple[int, int]:
    """(rows, columns) of a near-square tiling of n tiles."""
    if n < 1:
        raise ValueError(f"cannot tile {n} images")
    cols = math.ceil(math.sqrt(n))
    return math.ceil(n / cols), cols


def normalize_channels(tiles: torch.Tensor) -> torch.Tensor:
    """Stretch every channel of every tile onto [0, 1]; constant channels become 0."""
    flat = tiles.flatten(2)
    lo = flat.min(dim=2, keepdim=True).values
    hi = flat.max(dim=2, keepdim=True).values
    scaled = (flat - lo) / (hi - lo).clamp_min(1e-12)
    return scaled.view_as(tiles)


def tile_grid(tiles: torch.Tensor) -> np.ndarray:
    """Lay out (N, C, h, w) tiles, C in {1, 3}, as an 8-bit RGB raster."""
    _, cols = grid_shape(tiles.shape[0])
    grid = make_grid(normalize_channels(tiles.detach().float().cpu()), nrow=cols, padding=TILE_PADDING, pad_value=1.0)
    return (grid.clamp(0.0, 1.0) * 255.0).round().to(torch.uint8).permute(1, 2, 0).numpy()


def activation_tiles(activation: torch.Tensor) -> torch.Tensor:
    if activation.ndim == 1:
        activation = activation[:, None, None]
    return activation.unsqueeze(1)


def weight_tiles(weight: torch.Tensor, transposed: bool = False) -> torch.Tensor:
    """One tile per output filter: RGB when the filter reads 3 channels, else the channel mean."""
    if transposed:
        weight = weight.transpose(0, 1)
    tiles = weight if weight.shape[1] == 3 else weight.mean(dim=1, keepdim=True)
    k = tiles.shape[-1]
    if k < MIN_KERNEL_TILE:
        tiles = F.interpolate(tiles, scale_factor=math.ceil(MIN_KERNEL_TILE / k), mode="nearest")
    return tiles


def render_captures(captures: Sequence[LayerCapture], out_dir: Path) -> list[Path]:
    """Write the activation and weight grids of every capture."""
    written = []
    for capture in captures:
        path = out_dir / f"layer_{capture.layer_id:03d}_activation.png"
        write_raster(path, tile_grid(activation_tiles(capture.activation)))
        written.append(path)
        if capture.weight is None:
            logger.warning("layer %d (%s) has no convolution before it; no weight grid", capture.layer_id, capture.name)
            continue
        path = out_dir / f"layer_{capture.layer_id:03d}_weights.png"
        transposed = capture.kernel_transposed
        write_raster(path, tile_grid(weight_tiles(capture.weight, transposed)))
        written.append(path)
    return written


def visualize_layers(
    translator: LoadedTranslator,
    image: ImageTensor,
    layer_ids: Sequence[int],
    out_dir: Path,
) -> list[Path]:
    """Capture the requested layers of a translator on one image and write their grids.

    Raises:
        CheckpointError: If the image channel count does not match the translator.
        ConfigError: If a layer id does not exist.
    """
    if image.channels != translator.in_channels:
        raise CheckpointError(
            f"{translator.method.value} checkpoint expects {translator.in_channels}-channel input, "
            f"got {image.channels} channels"
        )
    captures = capture_layer_activations(translator.network, image.data, list(layer_ids))
    written = render_captures(captures, out_dir)
    logger.info("wrote %d grids for %d layers to %s", len(written), len(captures), out_dir)
    return written
