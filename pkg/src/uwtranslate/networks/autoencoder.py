"""Convolutional autoencoder with a ResNet-34 feature-extraction head.

The encoder keeps the ResNet-34 stage layout (3, 4, 6, 3 basic blocks) but runs every
stage at stride 1 after the stride-4 stem, so a 256x256 input is held at a 64x64
bottleneck. Two transpose convolutions bring it back to full resolution.
"""

import torch
from torch import nn
from torchvision.models.resnet import BasicBlock

RESNET34_LAYERS = (3, 4, 6, 3)


def _stage(inplanes: int, planes: int, blocks: int) -> nn.Sequential:
    downsample = None
    if inplanes != planes:
        downsample = nn.Sequential(
            nn.Conv2d(inplanes, planes, kernel_size=1, bias=False),
            nn.BatchNorm2d(planes),
        )
    layers = [BasicBlock(inplanes, planes, stride=1, downsample=downsample)]
    layers += [BasicBlock(planes, planes) for _ in range(1, blocks)]
    return nn.Sequential(*layers)


class Autoencoder(nn.Module):
    """MSE-trained encoder/decoder for paired translation."""

    def __init__(self, image_size: int = 256, base_filters: int = 64) -> None:
        super().__init__()
        if image_size % 4 != 0:
            raise ValueError(f"autoencoder image_size must be divisible by 4, got {image_size}")
        self.image_size = image_size
        self.in_channels = 3
        w = base_filters
        widths = (w, w * 2, w * 4, w * 8)

        stages = []
        inplanes = w
        for planes, blocks in zip(widths, RESNET34_LAYERS):
            stages.append(_stage(inplanes, planes, blocks))
            inplanes = planes

        self.encoder = nn.Sequential(
            nn.Conv2d(3, w, kernel_size=7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(w),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(kernel_size=3, stride=2, padding=1),
            *stages,
        )
        self.decoder = nn.Sequential(
            nn.ConvTranspose2d(widths[3], widths[2], kernel_size=4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(widths[2]),
            nn.ReLU(True),
            nn.ConvTranspose2d(widths[2], widths[1], kernel_size=4, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(widths[1]),
            nn.ReLU(True),
            nn.Conv2d(widths[1], 3, kernel_size=7, padding=3),
            nn.Tanh(),
        )
        self.bottleneck: torch.Tensor | None = None

    @property
    def bottleneck_size(self) -> int:
        return self.image_size // 4

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        expected = (3, self.image_size, self.image_size)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise ValueError(f"autoencoder expects (B, {', '.join(map(str, expected))}) input, got {tuple(x.shape)}")
        z = self.encoder(x)
        self.bottleneck = z.detach()
        return self.decoder(z)


def autoencoder_forward(a: Autoencoder, x: torch.Tensor) -> torch.Tensor:
    """Reconstruct a batch; the bottleneck activation stays on ``a.bottleneck``."""
    return a(x)
