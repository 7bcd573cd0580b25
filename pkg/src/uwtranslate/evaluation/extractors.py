"""Feature extractors for FID.

FID values are only comparable between runs that used the same extractor.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from uwtranslate.core.types import ImageTensor
from uwtranslate.errors import ConfigError

logger = logging.getLogger(__name__)


@runtime_checkable
class FeatureExtractor(Protocol):
    """Maps a sequence of images to an (n, output_dim) feature matrix."""

    name: str
    output_dim: int
    deterministic: bool

    def __call__(self, images: Sequence[ImageTensor]) -> np.ndarray: ...


class RandomProjectionExtractor:
    """Pooled RGB grid, fixed Gaussian projection, tanh.

    Needs no weights file; identical images give identical features.
    """

    deterministic = True

    def __init__(self, output_dim: int = 64, seed: int = 0, grid: int = 8) -> None:
        if output_dim < 1 or grid < 1:
            raise ConfigError("random projection extractor needs output_dim >= 1 and grid >= 1")
        self.output_dim = output_dim
        self.grid = grid
        self.seed = seed
        self.name = f"random_projection_d{output_dim}_g{grid}_s{seed}"
        in_dim = 3 * grid * grid
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((in_dim, output_dim)) / np.sqrt(in_dim)

    def features(self, image: ImageTensor) -> np.ndarray:
        rgb = image.data[:3] if image.channels >= 3 else image.data.expand(3, -1, -1)
        pooled = F.adaptive_avg_pool2d(rgb.double().unsqueeze(0), self.grid).flatten().numpy()
        return np.tanh(pooled @ self.projection)

    def __call__(self, images: Sequence[ImageTensor]) -> np.ndarray:
        return np.stack([self.features(image) for image in images])


class InceptionExtractor:
    """2048-D pool features of an Inception-v3 network loaded from a local weights file."""

    deterministic = True
    output_dim = 2048
    INPUT_SIZE = 299

    def __init__(self, weights_path: Path, device: str | None = None, batch_size: int = 16) -> None:
        from torchvision.models import inception_v3

        if not weights_path.is_file():
            raise ConfigError(f"extractor weights file not found: {weights_path}")
        self.name = f"inception_v3:{weights_path.name}"
        self.batch_size = batch_size
        self.device = torch.device(device or ("cuda" if torch.cuda.is_available() else "cpu"))
        model = inception_v3(weights=None, aux_logits=True, init_weights=False, transform_input=False)
        state = torch.load(weights_path, map_location="cpu")
        missing, unexpected = model.load_state_dict(state, strict=False)
        if missing:
            raise ConfigError(f"extractor weights {weights_path} are missing {len(missing)} entries, e.g. {missing[0]}")
        if unexpected:
            logger.warning("ignoring %d unexpected entries in %s", len(unexpected), weights_path)
        model.fc = nn.Identity()
        self.model = model.eval().to(self.device)

    def __call__(self, images: Sequence[ImageTensor]) -> np.ndarray:
        feats = []
        with torch.no_grad():
            for start in range(0, len(images), self.batch_size):
                chunk = torch.stack([img.data[:3] for img in images[start : start + self.batch_size]])
                chunk = F.interpolate(
                    chunk.to(self.device), size=(self.INPUT_SIZE, self.INPUT_SIZE), mode="bilinear", align_corners=False
                )
                feats.append(self.model(chunk).double().cpu().numpy())
        return np.concatenate(feats, axis=0)


def build_extractor(weights_path: Path | None = None, seed: int = 0) -> FeatureExtractor:
    """Inception features when a weights file is given, random projection otherwise."""
    if weights_path is not None:
        return InceptionExtractor(weights_path)
    return RandomProjectionExtractor(seed=seed)
