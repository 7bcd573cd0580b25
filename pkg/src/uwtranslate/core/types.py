"""Shared value types: image tensors, domain tags, and configuration records.

Every other module exchanges images as ImageTensor (channel-first, values in [-1, 1])
and reads hyperparameters from ContrastiveConfig / TrainConfig.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

import numpy as np
import torch

from uwtranslate.errors import ConfigError

CANONICAL_RANGE = (-1.0, 1.0)
VALID_CHANNELS = (1, 3, 4)
_RANGE_TOLERANCE = 1e-6


class DomainTag(str, Enum):
    """Which side of the translation a sample belongs to."""

    SOURCE_UNIFORM_LIGHTING = "source_uniform_lighting"
    TARGET_UNDERWATER = "target_underwater"


class Method(str, Enum):
    """Training recipe selector."""

    AUTOENCODER = "autoencoder"
    PIX2PIX = "pix2pix"
    CYCLEGAN = "cyclegan"
    CUT = "cut"
    CUT_DEPTH = "cut_depth"

    @property
    def paired(self) -> bool:
        return self in (Method.AUTOENCODER, Method.PIX2PIX)


class GanMode(str, Enum):
    """Adversarial loss variant."""

    VANILLA = "vanilla"
    LEAST_SQUARES = "least_squares"


@dataclass(frozen=True)
class ImageTensor:
    """A single normalized raster, shape (channels, height, width).

    Channel 3 of a 4-channel image is always the depth plane.
    """

    data: torch.Tensor
    domain: DomainTag | None = None

    def __post_init__(self) -> None:
        data = self.data
        if not isinstance(data, torch.Tensor):
            data = torch.as_tensor(np.asarray(data))
        data = data.detach().to(torch.float32)
        if data.ndim != 3:
            raise ValueError(f"ImageTensor expects (channels, height, width), got shape {tuple(data.shape)}")
        if data.shape[0] not in VALID_CHANNELS:
            raise ValueError(f"ImageTensor channel count must be one of {VALID_CHANNELS}, got {data.shape[0]}")
        if not bool(torch.isfinite(data).all()):
            raise ValueError("ImageTensor contains NaN or Inf values")
        lo, hi = CANONICAL_RANGE
        if data.numel() and (float(data.min()) < lo - _RANGE_TOLERANCE or float(data.max()) > hi + _RANGE_TOLERANCE):
            raise ValueError(
                f"ImageTensor values must lie in [{lo}, {hi}], got [{float(data.min()):.4f}, {float(data.max()):.4f}]"
            )
        object.__setattr__(self, "data", data.clamp(lo, hi))

    @property
    def channels(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def has_depth(self) -> bool:
        return self.channels == 4

    @property
    def rgb(self) -> ImageTensor:
        """The first three channels (the image itself for 3-channel inputs)."""
        if self.channels == 1:
            raise ValueError("single-channel image has no RGB planes")
        return ImageTensor(self.data[:3], self.domain)

    @property
    def depth(self) -> ImageTensor:
        if not self.has_depth:
            raise ValueError("image has no depth plane")
        return ImageTensor(self.data[3:4], self.domain)

    def to_batch(self) -> torch.Tensor:
        """Return a (1, C, H, W) tensor."""
        return self.data.unsqueeze(0)

    @classmethod
    def from_batch(cls, batch: torch.Tensor, index: int = 0, domain: DomainTag | None = None) -> ImageTensor:
        return cls(batch[index], domain)


@dataclass(frozen=True)
class ContrastiveConfig:
    """PatchNCE hyperparameters."""

    temperature: float = 0.07
    negatives_per_anchor: int = 255
    patches_per_image: int = 256
    embed_dim: int = 256
    layer_indices: tuple[int, ...] = (0, 4, 8, 12, 16)
    normalize_embeddings: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_indices", tuple(int(i) for i in self.layer_indices))
        if not self.temperature > 0:
            raise ConfigError(f"contrastive.temperature must be > 0, got {self.temperature}")
        if self.negatives_per_anchor < 1:
            raise ConfigError(f"contrastive.negatives_per_anchor must be >= 1, got {self.negatives_per_anchor}")
        if self.patches_per_image < self.negatives_per_anchor + 1:
            raise ConfigError(
                "contrastive.patches_per_image must be >= negatives_per_anchor + 1 "
                f"({self.patches_per_image} < {self.negatives_per_anchor + 1})"
            )
        if self.embed_dim < 1:
            raise ConfigError(f"contrastive.embed_dim must be >= 1, got {self.embed_dim}")
        if not self.layer_indices:
            raise ConfigError("contrastive.layer_indices cannot be empty")
        if any(b <= a for a, b in zip(self.layer_indices, self.layer_indices[1:])):
            raise ConfigError(f"contrastive.layer_indices must be strictly increasing, got {list(self.layer_indices)}")
        if self.layer_indices[0] < 0:
            raise ConfigError("contrastive.layer_indices must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["layer_indices"] = list(self.layer_indices)
        return data


LOSS_WEIGHT_NAMES = ("gan", "patchnce_x", "patchnce_y")


def _default_loss_weights() -> dict[str, float]:
    return dict.fromkeys(LOSS_WEIGHT_NAMES, 1.0)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run."""

    method: Method = Method.CUT
    learning_rate: float = 2e-3
    weight_decay: float = 0.0
    batch_size: int = 8
    epochs: int = 200
    gan_mode: GanMode = GanMode.LEAST_SQUARES
    n_res_blocks: int = 9
    image_size: int = 256
    seed: int = 0
    contrastive: ContrastiveConfig | None = None
    base_filters: int = 64
    d_layers: int = 3
    d_padding: int = 1
    lambda_cycle: float = 10.0
    lambda_l1: float = 100.0
    loss_weights: dict[str, float] = field(default_factory=_default_loss_weights)
    betas: tuple[float, float] = (0.5, 0.999)
    checkpoint_every: int = 10
    log_flush_interval: int = 50
    max_steps: int | None = None
    deterministic: bool = False
    target_depth: bool = True

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError as e:
            raise ConfigError(f"train.method: unknown method {self.method!r}") from e
        try:
            object.__setattr__(self, "gan_mode", GanMode(self.gan_mode))
        except ValueError as e:
            raise ConfigError(f"train.gan_mode: unknown GAN mode {self.gan_mode!r}") from e
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "loss_weights", {**_default_loss_weights(), **dict(self.loss_weights)})

        if not self.learning_rate > 0:
            raise ConfigError(f"train.learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"train.weight_decay must be >= 0, got {self.weight_decay}")
        for name in ("batch_size", "epochs", "n_res_blocks", "image_size", "base_filters", "d_layers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be a positive integer, got {getattr(self, name)}")
        if self.image_size % 4 != 0:
            raise ConfigError(f"train.image_size must be divisible by 4, got {self.image_size}")
        if self.checkpoint_every < 1 or self.log_flush_interval < 1:
            raise ConfigError("train.checkpoint_every and train.log_flush_interval must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError(f"train.max_steps must be >= 1 when set, got {self.max_steps}")
        if self.method in (Method.CUT, Method.CUT_DEPTH) and self.contrastive is None:
            raise ConfigError(f"contrastive section is required for method {self.method.value}")
        unknown = sorted(set(self.loss_weights) - set(LOSS_WEIGHT_NAMES))
        if unknown:
            raise ConfigError(f"train.loss_weights: unknown terms {unknown}; expected {list(LOSS_WEIGHT_NAMES)}")
        if any(w < 0 for w in self.loss_weights.values()):
            raise ConfigError("train.loss_weights must be non-negative")

    @property
    def in_channels(self) -> int:
        """Input channel count of the translating network (depth adds a fourth plane)."""
        return 4 if self.method is Method.CUT_DEPTH else 3

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["method"] = self.method.value
        data["gan_mode"] = self.gan_mode.value
        data["betas"] = list(self.betas)
        data["contrastive"] = self.contrastive.to_dict() if self.contrastive is not None else None
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrainConfig:
        data = dict(data)
        contrastive = data.pop("contrastive", None)
        if isinstance(contrastive, dict):
            contrastive = ContrastiveConfig(**contrastive)
        return cls(contrastive=contrastive, **data)


def _check_range(value_range: tuple[float, float]) -> tuple[float, float]:
    lo, hi = (float(v) for v in value_range)
    if not hi > lo:
        raise ValueError(f"constant-range image: declared range [{lo}, {hi}] is degenerate")
    return lo, hi


def normalize(
    raw: np.ndarray,
    value_range: tuple[float, float],
    domain: DomainTag | None = None,
) -> ImageTensor:
    """Affinely map a raw raster onto [-1, 1].

    Args:
        raw: Array of shape (H, W) or (H, W, C) in image layout.
        value_range: Declared (min, max) of the raw values; values outside are clipped.
        domain: Optional domain tag carried by the result.

    Returns:
        Channel-first ImageTensor.

    Raises:
        ValueError: If the declared range is degenerate.
    """
    lo, hi = _check_range(value_range)
    array = np.asarray(raw, dtype=np.float64)
    if array.ndim == 2:
        array = array[:, :, None]
    if array.ndim != 3:
        raise ValueError(f"raw raster must be (H, W) or (H, W, C), got shape {array.shape}")
    scaled = 2.0 * (np.clip(array, lo, hi) - lo) / (hi - lo) - 1.0
    return ImageTensor(torch.from_numpy(np.ascontiguousarray(scaled.transpose(2, 0, 1))).float(), domain)


def denormalize(image: ImageTensor, target_range: tuple[float, float] = (0, 255)) -> np.ndarray:
    """Inverse of normalize, quantized to integers of the target range.

    Returns an (H, W, C) array, or (H, W) for single-channel images; dtype is uint8 when
    the range fits in a byte and uint16 otherwise.
    """
    lo, hi = _check_range(target_range)
    values = image.data.double().numpy().transpose(1, 2, 0)
    raw = np.rint((values + 1.0) / 2.0 * (hi - lo) + lo)
    raw = np.clip(raw, lo, hi)
    dtype = np.uint8 if hi <= 255 and lo >= 0 else np.uint16 if lo >= 0 else np.int32
    raw = raw.astype(dtype)
    return raw[:, :, 0] if raw.shape[2] == 1 else raw
