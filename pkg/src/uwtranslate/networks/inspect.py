"""Flattened layer enumeration and activation capture for the visualize command."""

from dataclasses import dataclass

import torch
from torch import nn

from uwtranslate.errors import ConfigError

_CONV_TYPES = (nn.Conv2d, nn.ConvTranspose2d)


@dataclass
class LayerCapture:
    """Output of one leaf layer plus the convolution kernel that produced it."""

    layer_id: int
    name: str
    activation: torch.Tensor
    weight: torch.Tensor | None
    kernel_transposed: bool = False


def list_layers(model: nn.Module) -> list[tuple[str, nn.Module]]:
    """Leaf modules in registration order; the list index is the layer id."""
    return [(name, m) for name, m in model.named_modules() if name and not list(m.children())]


def _kernel_for(layers: list[tuple[str, nn.Module]], layer_id: int) -> nn.Module | None:
    for _, module in reversed(layers[: layer_id + 1]):
        if isinstance(module, _CONV_TYPES):
            return module
    return None


def capture_layer_activations(model: nn.Module, image: torch.Tensor, layer_ids: list[int]) -> list[LayerCapture]:
    """Run ``image`` through ``model`` and keep the outputs of the requested layers.

    Args:
        model: Any network; layers are numbered by ``list_layers``.
        image: (C, H, W) or (1, C, H, W) input tensor.
        layer_ids: Flattened layer ids to capture.

    Returns:
        One LayerCapture per requested id, in request order. A module called more than
        once per forward (a shared ReLU) keeps its last output.

    Raises:
        ConfigError: If any id does not name a layer.
    """
    layers = list_layers(model)
    bad = [i for i in layer_ids if not 0 <= i < len(layers)]
    if bad:
        raise ConfigError(f"unknown layer ids {bad}; valid ids are 0..{len(layers) - 1}")

    outputs: dict[int, torch.Tensor] = {}
    handles = []
    for layer_id in set(layer_ids):

        def hook(_module: nn.Module, _inputs: tuple, output: torch.Tensor, layer_id: int = layer_id) -> None:
            # inplace ops downstream would otherwise rewrite the capture
            outputs[layer_id] = output.detach().clone()

        handles.append(layers[layer_id][1].register_forward_hook(hook))

    batch = image.unsqueeze(0) if image.ndim == 3 else image
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            model(batch)
    finally:
        for handle in handles:
            handle.remove()
        model.train(was_training)

    captures = []
    for i in layer_ids:
        conv = _kernel_for(layers, i)
        captures.append(
            LayerCapture(
                layer_id=i,
                name=layers[i][0],
                activation=outputs[i][0],
                weight=conv.weight.detach().clone() if conv is not None else None,
                kernel_transposed=isinstance(conv, nn.ConvTranspose2d),
            )
        )
    return captures
