"""Build the set of networks each training method owns."""

import logging

import torch
from torch import nn

from uwtranslate.core.types import Method, TrainConfig
from uwtranslate.networks.autoencoder import Autoencoder
from uwtranslate.networks.discriminator import PatchDiscriminator
from uwtranslate.networks.init import init_weights
from uwtranslate.networks.refiner import ProjectionHeads, Refiner
from uwtranslate.networks.unet import PairedGenerator

logger = logging.getLogger(__name__)

# Network used by `translate` / `evaluate` for each method.
TRANSLATOR_NAME: dict[Method, str] = {
    Method.AUTOENCODER: "autoencoder",
    Method.PIX2PIX: "generator",
    Method.CYCLEGAN: "g_xy",
    Method.CUT: "refiner",
    Method.CUT_DEPTH: "refiner",
}


def _discriminator(config: TrainConfig, in_channels: int = 3) -> PatchDiscriminator:
    return PatchDiscriminator(in_channels, config.base_filters, config.d_layers, config.d_padding)


def _refiner(config: TrainConfig, in_channels: int = 3) -> Refiner:
    return Refiner(in_channels, 3, config.base_filters, config.n_res_blocks)


def build_networks(config: TrainConfig) -> dict[str, nn.Module]:
    """Instantiate and initialize every network for ``config.method``.

    Initialization is seeded from ``config.seed`` so two builds are identical.
    """
    torch.manual_seed(config.seed)
    method = config.method
    nets: dict[str, nn.Module]
    if method is Method.AUTOENCODER:
        nets = {"autoencoder": Autoencoder(config.image_size, config.base_filters)}
    elif method is Method.PIX2PIX:
        nets = {
            "generator": PairedGenerator(3, 3, config.image_size, config.base_filters),
            # conditional: sees the input next to the real or generated output
            "discriminator": _discriminator(config, in_channels=6),
        }
    elif method is Method.CYCLEGAN:
        nets = {
            "g_xy": _refiner(config),
            "g_yx": _refiner(config),
            "d_y": _discriminator(config),
            "d_x": _discriminator(config),
        }
    else:
        refiner = _refiner(config, config.in_channels)
        heads = ProjectionHeads(refiner.layer_channels(config.contrastive.layer_indices), config.contrastive.embed_dim)
        nets = {"refiner": refiner, "discriminator": _discriminator(config), "heads": heads}

    for net in nets.values():
        init_weights(net)
    logger.debug(
        "built %s networks: %s",
        method.value,
        ", ".join(f"{name}={sum(p.numel() for p in net.parameters())}" for name, net in nets.items()),
    )
    return nets


def parameter_count(nets: dict[str, nn.Module], names: list[str] | None = None) -> int:
    return sum(p.numel() for name, net in nets.items() if names is None or name in names for p in net.parameters())
