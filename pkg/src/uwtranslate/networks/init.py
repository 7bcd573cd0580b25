"""Weight initialization shared by every network."""

from torch import nn
from torch.nn import init


def init_weights(net: nn.Module, gain: float = 0.02) -> nn.Module:
    """Zero-mean Gaussian (std ``gain``) for convolutions and linear layers.

    Normalization layers with affine parameters get weight ~ N(1, gain) and zero bias.
    """

    def init_func(m: nn.Module) -> None:
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            init.normal_(m.weight.data, 0.0, gain)
            if m.bias is not None:
                init.constant_(m.bias.data, 0.0)
        elif isinstance(m, (nn.BatchNorm2d, nn.InstanceNorm2d)) and m.weight is not None:
            init.normal_(m.weight.data, 1.0, gain)
            init.constant_(m.bias.data, 0.0)

    net.apply(init_func)
    return net
