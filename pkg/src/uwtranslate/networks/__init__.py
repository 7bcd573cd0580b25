"""Translators, discriminators, projection heads, and layer inspection."""

from uwtranslate.networks.autoencoder import Autoencoder, autoencoder_forward
from uwtranslate.networks.discriminator import PatchDiscriminator, discriminate
from uwtranslate.networks.factory import TRANSLATOR_NAME, build_networks, parameter_count
from uwtranslate.networks.init import init_weights
from uwtranslate.networks.inspect import LayerCapture, capture_layer_activations, list_layers
from uwtranslate.networks.refiner import (
    FeatureStack,
    ProjectionHeads,
    Refiner,
    encode_features,
    refiner_forward,
    sample_patch_ids,
)
from uwtranslate.networks.unet import PairedGenerator

__all__ = [
    "Autoencoder",
    "FeatureStack",
    "LayerCapture",
    "PairedGenerator",
    "PatchDiscriminator",
    "ProjectionHeads",
    "Refiner",
    "TRANSLATOR_NAME",
    "autoencoder_forward",
    "build_networks",
    "capture_layer_activations",
    "discriminate",
    "encode_features",
    "init_weights",
    "list_layers",
    "parameter_count",
    "refiner_forward",
    "sample_patch_ids",
]
