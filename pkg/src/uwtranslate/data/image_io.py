"""Raster decoding, resizing and encoding at the file boundary.

Everything here works in image layout (H, W[, C]); conversion to channel-first
happens in core.types.normalize.
"""

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from uwtranslate.errors import DataError

RASTER_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")

_SIXTEEN_BIT_MODES = {"I;16", "I;16B", "I;16L", "I;16N", "I"}


def read_raster(path: Path) -> tuple[np.ndarray, tuple[float, float] | None]:
    """Decode a raster file.

    Args:
        path: Image file path.

    Returns:
        The pixel array and its declared value range. 8-bit images are returned as RGB
        (H, W, 3) or grey (H, W) uint8 with range (0, 255); 16-bit images as (H, W) with
        range (0, 65535); float images with range None (the caller must supply one).

    Raises:
        DataError: If the file cannot be decoded.
    """
    try:
        with Image.open(path) as img:
            mode = img.mode
            if mode in _SIXTEEN_BIT_MODES:
                return np.array(img, dtype=np.int64).astype(np.uint16), (0.0, 65535.0)
            if mode == "F":
                return np.array(img, dtype=np.float32), None
            if mode == "L":
                return np.array(img, dtype=np.uint8), (0.0, 255.0)
            return np.array(img.convert("RGB"), dtype=np.uint8), (0.0, 255.0)
    except (OSError, ValueError) as e:
        raise DataError(f"cannot decode raster {path}: {e}") from e


def resize_raster(array: np.ndarray, size: int, nearest: bool = False) -> np.ndarray:
    """Resize to size x size; bilinear for colour, nearest-neighbour for depth.

    Returns a float64 array in the same value units as the input.
    """
    if array.shape[0] == size and array.shape[1] == size:
        return array.astype(np.float64)
    squeeze = array.ndim == 2
    planes = array[:, :, None] if squeeze else array
    tensor = torch.from_numpy(np.ascontiguousarray(planes.transpose(2, 0, 1), dtype=np.float64)).unsqueeze(0)
    if nearest:
        resized = F.interpolate(tensor, size=(size, size), mode="nearest")
    else:
        resized = F.interpolate(tensor, size=(size, size), mode="bilinear", align_corners=False)
    out = resized[0].numpy().transpose(1, 2, 0)
    return out[:, :, 0] if squeeze else out


def write_raster(path: Path, array: np.ndarray) -> None:
    """Write an 8-bit raster losslessly (PNG by default)."""
    if array.dtype != np.uint8:
        raise DataError(f"only 8-bit rasters are written, got dtype {array.dtype}")
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(array).save(path)


def list_rasters(folder: Path, extensions: tuple[str, ...] = RASTER_EXTENSIONS) -> list[Path]:
    """Sorted raster files directly inside a folder."""
    return sorted(p for p in folder.iterdir() if p.is_file() and p.suffix.lower() in extensions)
