"""Refiner (ResNet-style translator), projection heads, and patch feature sampling.

The refiner is split into an encoder and a decoder so the encoder can be reused to
embed both the input and the translated output for the patchwise contrastive loss.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from uwtranslate.core.types import ContrastiveConfig, ImageTensor


class ResnetBlock(nn.Module):
    """Two reflect-padded 3x3 convolutions with a skip connection."""

    def __init__(self, dim: int) -> None:
        super().__init__()
        self.block = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(dim, dim, kernel_size=3, bias=True),
            nn.InstanceNorm2d(dim),
            nn.ReLU(True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(dim, dim, kernel_size=3, bias=True),
            nn.InstanceNorm2d(dim),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.block(x)


class Refiner(nn.Module):
    """Downsampling convolutions, residual blocks, fractional-strided upsampling.

    Layer ids used by the contrastive loss index into ``encoder``; the residual trunk
    belongs to the encoder so deep taps are available.
    """

    N_DOWNSAMPLING = 2

    def __init__(
        self, in_channels: int = 3, out_channels: int = 3, base_filters: int = 64, n_res_blocks: int = 9
    ) -> None:
        super().__init__()
        if in_channels not in (3, 4):
            raise ValueError(f"refiner in_channels must be 3 or 4, got {in_channels}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.n_res_blocks = n_res_blocks
        ngf = base_filters

        encoder: list[nn.Module] = [
            nn.ReflectionPad2d(3),
            nn.Conv2d(in_channels, ngf, kernel_size=7, bias=True),
            nn.InstanceNorm2d(ngf),
            nn.ReLU(True),
        ]
        channels = [in_channels, ngf, ngf, ngf]
        for i in range(self.N_DOWNSAMPLING):
            mult = 2**i
            encoder += [
                nn.Conv2d(ngf * mult, ngf * mult * 2, kernel_size=3, stride=2, padding=1, bias=True),
                nn.InstanceNorm2d(ngf * mult * 2),
                nn.ReLU(True),
            ]
            channels += [ngf * mult * 2] * 3
        trunk = ngf * 2**self.N_DOWNSAMPLING
        for _ in range(n_res_blocks):
            encoder.append(ResnetBlock(trunk))
            channels.append(trunk)

        decoder: list[nn.Module] = []
        for i in range(self.N_DOWNSAMPLING):
            mult = 2 ** (self.N_DOWNSAMPLING - i)
            decoder += [
                nn.ConvTranspose2d(
                    ngf * mult, ngf * mult // 2, kernel_size=3, stride=2, padding=1, output_padding=1, bias=True
                ),
                nn.InstanceNorm2d(ngf * mult // 2),
                nn.ReLU(True),
            ]
        decoder += [nn.ReflectionPad2d(3), nn.Conv2d(ngf, out_channels, kernel_size=7), nn.Tanh()]

        self.encoder = nn.Sequential(*encoder)
        self.decoder = nn.Sequential(*decoder)
        self.encoder_channels = channels

    def check_layers(self, layer_ids: Sequence[int]) -> None:
        depth = len(self.encoder)
        bad = [i for i in layer_ids if not 0 <= i < depth]
        if bad:
            raise ValueError(f"encoder layer ids {bad} out of range; the encoder has layers 0..{depth - 1}")

    def layer_channels(self, layer_ids: Sequence[int]) -> list[int]:
        self.check_layers(layer_ids)
        return [self.encoder_channels[i] for i in layer_ids]

    def _check_input(self, x: torch.Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(f"refiner expects (B, {self.in_channels}, H, W) input, got {tuple(x.shape)}")

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self._check_input(x)
        return self.decoder(self.encoder(x))

    def encode(self, x: torch.Tensor, layer_ids: Sequence[int]) -> list[torch.Tensor]:
        """Feature maps after each requested encoder layer (stops at the deepest one)."""
        self._check_input(x)
        self.check_layers(layer_ids)
        wanted = set(layer_ids)
        feats = []
        feat = x
        for layer_id, layer in enumerate(self.encoder):
            feat = layer(feat)
            if layer_id in wanted:
                feats.append(feat)
            if layer_id == layer_ids[-1]:
                break
        return feats


def refiner_forward(refiner: Refiner, x: ImageTensor) -> ImageTensor:
    """Translate a single image; output is RGB in [-1, 1] with the input's spatial size."""
    if x.channels != refiner.in_channels:
        raise ValueError(f"refiner consumes {refiner.in_channels} channels but the image has {x.channels}")
    return ImageTensor(refiner(x.to_batch())[0])


class ProjectionHeads(nn.Module):
    """One two-layer MLP per selected encoder layer, mapping C_l features to K dims."""

    def __init__(self, layer_channels: Sequence[int], embed_dim: int = 256) -> None:
        super().__init__()
        self.embed_dim = embed_dim
        self.mlps = nn.ModuleList(
            nn.Sequential(nn.Linear(c, embed_dim), nn.ReLU(), nn.Linear(embed_dim, embed_dim)) for c in layer_channels
        )

    def __len__(self) -> int:
        return len(self.mlps)

    def forward(self, feats: Sequence[torch.Tensor]) -> list[torch.Tensor]:
        return [mlp(f) for mlp, f in zip(self.mlps, feats)]


@dataclass
class FeatureStack:
    """Sampled, projected patch embeddings for a batch of images.

    ``features[l]`` has shape (B, P, K); ``patch_ids[l]`` holds the P flattened spatial
    locations sampled without replacement out of ``spatial_sizes[l]``.
    """

    features: list[torch.Tensor]
    layer_ids: tuple[int, ...]
    patch_ids: list[torch.Tensor]
    spatial_sizes: list[int]


def sample_patch_ids(spatial_sizes: Sequence[int], num_patches: int, seed: int) -> list[torch.Tensor]:
    """Seeded location sample per layer; identical seeds give identical locations."""
    generator = torch.Generator().manual_seed(int(seed))
    ids = []
    for size in spatial_sizes:
        if num_patches > size:
            raise ValueError(f"patches_per_image={num_patches} exceeds the layer's {size} spatial locations")
        ids.append(torch.randperm(size, generator=generator)[:num_patches])
    return ids


def encode_features(
    refiner: Refiner,
    heads: ProjectionHeads,
    images: torch.Tensor | ImageTensor,
    cfg: ContrastiveConfig,
    seed: int = 0,
    patch_ids: list[torch.Tensor] | None = None,
) -> FeatureStack:
    """Embed sampled patches of ``images`` at every configured encoder layer.

    Args:
        refiner: Refiner whose encoder produces the feature maps.
        heads: Projection heads, one per configured layer.
        images: (B, C, H, W) tensor or a single ImageTensor.
        cfg: Contrastive configuration (layers, patches, normalization).
        seed: Location sampling seed, ignored when patch_ids is given.
        patch_ids: Reuse previously sampled locations.

    Returns:
        FeatureStack with (B, P, K) embeddings per layer.
    """
    batch = images.to_batch() if isinstance(images, ImageTensor) else images
    if len(heads) != len(cfg.layer_indices):
        raise ValueError(f"{len(heads)} projection heads for {len(cfg.layer_indices)} layers")
    maps = refiner.encode(batch, cfg.layer_indices)
    spatial_sizes = [m.shape[2] * m.shape[3] for m in maps]
    if patch_ids is None:
        patch_ids = sample_patch_ids(spatial_sizes, cfg.patches_per_image, seed)

    sampled = []
    for feat, ids in zip(maps, patch_ids):
        flat = feat.permute(0, 2, 3, 1).flatten(1, 2)  # (B, S, C)
        sampled.append(flat[:, ids.to(flat.device), :])
    projected = heads(sampled)
    if cfg.normalize_embeddings:
        projected = [F.normalize(p, p=2, dim=-1, eps=1e-7) for p in projected]
    return FeatureStack(
        features=projected,
        layer_ids=tuple(cfg.layer_indices),
        patch_ids=list(patch_ids),
        spatial_sizes=spatial_sizes,
    )
