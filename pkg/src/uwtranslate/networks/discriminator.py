"""PatchGAN discriminator: a grid of real/fake logits, one per overlapping patch."""

import torch
from torch import nn

from uwtranslate.core.types import ImageTensor

KERNEL = 4


class PatchDiscriminator(nn.Module):
    """Strided 4x4 convolution stack ending in a one-channel logits map.

    With ``n_layers=3`` the receptive field is 70x70; ``padding=1`` maps 256x256 to a
    30x30 grid and ``padding=0`` maps a single 70x70 patch to 1x1.
    """

    def __init__(self, in_channels: int = 3, base_filters: int = 64, n_layers: int = 3, padding: int = 1) -> None:
        super().__init__()
        self.in_channels = in_channels
        self.n_layers = n_layers
        self.padding = padding
        ndf = base_filters

        sequence: list[nn.Module] = [
            nn.Conv2d(in_channels, ndf, kernel_size=KERNEL, stride=2, padding=padding),
            nn.LeakyReLU(0.2, True),
        ]
        strides = [2]
        nf = ndf
        for _ in range(1, n_layers):
            nf_prev, nf = nf, min(nf * 2, ndf * 8)
            sequence += [
                nn.Conv2d(nf_prev, nf, kernel_size=KERNEL, stride=2, padding=padding),
                nn.InstanceNorm2d(nf),
                nn.LeakyReLU(0.2, True),
            ]
            strides.append(2)
        nf_prev, nf = nf, min(nf * 2, ndf * 8)
        sequence += [
            nn.Conv2d(nf_prev, nf, kernel_size=KERNEL, stride=1, padding=padding),
            nn.InstanceNorm2d(nf),
            nn.LeakyReLU(0.2, True),
            nn.Conv2d(nf, 1, kernel_size=KERNEL, stride=1, padding=padding),
        ]
        strides += [1, 1]
        self.model = nn.Sequential(*sequence)
        self._strides = strides

    def receptive_field(self) -> int:
        field = 1
        for stride in reversed(self._strides):
            field = field * stride + (KERNEL - stride)
        return field

    def grid_size(self, input_size: int) -> int:
        """Logit grid extent for a square input of the given side."""
        size = input_size
        for stride in self._strides:
            size = (size + 2 * self.padding - KERNEL) // stride + 1
        return size

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(f"discriminator expects (B, {self.in_channels}, H, W) input, got {tuple(x.shape)}")
        field = self.receptive_field()
        if min(x.shape[2], x.shape[3]) < field:
            raise ValueError(f"input {x.shape[2]}x{x.shape[3]} is smaller than the {field}x{field} receptive field")
        return self.model(x)


def discriminate(d: PatchDiscriminator, image: ImageTensor) -> torch.Tensor:
    """Logit grid (H', W') for one image."""
    return d(image.to_batch())[0, 0]
