import math
from typing import List

import torch
import torch.nn as nn
import torch.nn.functional as F

from src.errors import ConfigurationError
from src.util import is_power_of_two


class SEBlock(nn.Module):
    """
    Channel squeeze-and-excitation: a spatial mean per channel drives a learned sigmoid gate.

    output[c] = sigmoid(W2 · relu(W1 · mean(x)))[c] × x[c]
    """

    def __init__(self, channels: int, reduction: int):
        super().__init__()
        self.channels = channels
        self.reduce = nn.Linear(channels, channels // reduction)
        self.expand = nn.Linear(channels // reduction, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        squeezed = x.mean(dim=(-2, -1))
        gate = torch.sigmoid(self.expand(F.relu(self.reduce(squeezed))))
        return x * gate[..., None, None]


class Bottleneck(nn.Module):
    """ResNet50 bottleneck (1×1 reduce, 3×3, 1×1 expand) with post-activation and an optional projection shortcut."""

    expansion = 4

    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        mid_channels = max(1, out_channels // self.expansion)
        self.conv1 = nn.Conv2d(in_channels, mid_channels, kernel_size=1)
        self.conv2 = nn.Conv2d(mid_channels, mid_channels, kernel_size=3, stride=stride, padding=1)
        self.conv3 = nn.Conv2d(mid_channels, out_channels, kernel_size=1)
        if stride != 1 or in_channels != out_channels:
            self.shortcut: nn.Module = nn.Conv2d(in_channels, out_channels, kernel_size=1, stride=stride)
        else:
            self.shortcut = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = F.relu(self.conv1(x))
        out = F.relu(self.conv2(out))
        out = self.conv3(out)
        return F.relu(out + self.shortcut(x))


class ResidualSEBlock(nn.Module):
    """A bottleneck followed by its SE block."""

    def __init__(self, in_channels: int, out_channels: int, stride: int, reduction: int):
        super().__init__()
        self.residual = Bottleneck(in_channels, out_channels, stride)
        self.se = SEBlock(out_channels, reduction)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.se(self.residual(x))


class SpecializedTap(nn.Module):
    """Fixed-width 3×3 convolution with rectification, taken after an SE output."""

    def __init__(self, in_channels: int, tap_channels: int):
        super().__init__()
        self.in_channels = in_channels
        self.conv = nn.Conv2d(in_channels, tap_channels, kernel_size=3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.relu(self.conv(x))


class DeconvUpsampler(nn.Module):
    """
    Chain of stride-2 transposed convolutions (kernel 4, padding 1) restoring input resolution.

    Rectification sits between the doubling steps, not after the last one.
    """

    def __init__(self, channels: int, stride: int):
        super().__init__()
        if not is_power_of_two(stride) or stride < 2:
            raise ConfigurationError(f"Upsampling stride must be a power of two ≥ 2, got {stride}")
        self.stride = stride
        self.steps = nn.ModuleList(
            nn.ConvTranspose2d(channels, channels, kernel_size=4, stride=2, padding=1)
            for _ in range(int(math.log2(stride)))
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        last = len(self.steps) - 1
        for i, step in enumerate(self.steps):
            x = step(x)
            if i < last:
                x = F.relu(x)
        return x


def he_initialize(modules: List[nn.Module]) -> None:
    """He fan-in initialization for every conv/linear weight; zero biases."""
    for module in modules:
        for layer in module.modules():
            if isinstance(layer, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                nn.init.kaiming_normal_(layer.weight, mode="fan_in", nonlinearity="relu")
                if layer.bias is not None:
                    nn.init.zeros_(layer.bias)
