import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from src.const import INPUT_MULTIPLE, PROBABILITY_FLOOR, STAGE_STRIDES
from src.errors import ConfigurationError, ShapeError
from src.network.layers import DeconvUpsampler, ResidualSEBlock, SEBlock, SpecializedTap, he_initialize
from src.types.exam import InputStack, ProbabilityMap
from src.types.network import ModelParams, NetworkConfig
from src.util import pad_to_multiple

logger = logging.getLogger(__name__)


class RSENet(nn.Module):
    """
    2.5D residual squeeze-and-excitation segmentation network.

    stem (stride 4) → 4 stages of bottleneck+SE blocks → a k-channel tap per stage output
    (or per block) → deconvolutional upsampling of every tap to input resolution →
    concatenation → 1×1 head producing one logit channel.
    """

    def __init__(self, config: NetworkConfig):
        super().__init__()
        config.check_stages()
        self.config = config

        self.stem = nn.Conv2d(config.input_channels, config.stem_channels, kernel_size=7, stride=2, padding=3)
        self.pool = nn.MaxPool2d(kernel_size=3, stride=2, padding=1)

        self.stages = nn.ModuleList()
        # (stage, block) positions whose SE output feeds a tap
        self.tap_sources: List[Tuple[int, int]] = []
        in_channels = config.stem_channels
        for stage, (count, out_channels) in enumerate(zip(config.stage_block_counts, config.stage_channels)):
            blocks = nn.ModuleList()
            for block in range(count):
                stride = 2 if stage > 0 and block == 0 else 1
                blocks.append(ResidualSEBlock(in_channels, out_channels, stride, config.se_reduction))
                in_channels = out_channels
                if config.tap_every_block or block == count - 1:
                    self.tap_sources.append((stage, block))
            self.stages.append(blocks)

        self.taps = nn.ModuleList(
            SpecializedTap(config.stage_channels[stage], config.tap_channels) for stage, _ in self.tap_sources
        )
        self.upsamplers = nn.ModuleList(
            DeconvUpsampler(config.tap_channels, STAGE_STRIDES[stage]) for stage, _ in self.tap_sources
        )
        self.head = nn.Conv2d(len(self.tap_sources) * config.tap_channels, config.head_classes, kernel_size=1)
        self.aux_heads = nn.ModuleList(
            nn.Conv2d(config.tap_channels, config.head_classes, kernel_size=1)
            for _ in (self.tap_sources if config.auxiliary_heads else [])
        )

    def tap_outputs(self, x: torch.Tensor) -> List[torch.Tensor]:
        """Tap feature maps at their native resolution, in tap order."""
        x = self.pool(F.relu(self.stem(x)))
        taps = []
        tap_index = 0
        for stage, blocks in enumerate(self.stages):
            for block_index, block in enumerate(blocks):
                x = block(x)
                if tap_index < len(self.tap_sources) and self.tap_sources[tap_index] == (stage, block_index):
                    taps.append(self.taps[tap_index](x))
                    tap_index += 1
        return taps

    def forward_with_aux(self, x: torch.Tensor) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        upsampled = [upsampler(tap) for upsampler, tap in zip(self.upsamplers, self.tap_outputs(x))]
        logits = self.head(torch.cat(upsampled, dim=1))
        aux_logits = [aux_head(feature) for aux_head, feature in zip(self.aux_heads, upsampled)]
        return logits, aux_logits

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        logits, _ = self.forward_with_aux(x)
        return logits


def build_network(config: NetworkConfig, seed: int, pretrained_path: Optional[Path] = None) -> ModelParams:
    """
    Build and initialize an RSE-Net.

    Conv, deconv and linear weights use He fan-in initialization, all biases start at zero.

    Args:
        config (NetworkConfig): Architecture to build.
        seed (int): Initialization seed; the global torch RNG state is left untouched.
        pretrained_path (Optional[Path]): Optional state dict whose matching encoder tensors are copied in.

    Returns:
        ModelParams: The initialized network.
    """
    if not isinstance(config, NetworkConfig):
        raise ConfigurationError(f"Expected a NetworkConfig, got {type(config).__name__}")
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        network = RSENet(config)
        he_initialize([network])

    model = ModelParams(config=config, network=network, seed=seed)
    if pretrained_path is not None:
        from src.network.checkpoint import load_pretrained_encoder

        load_pretrained_encoder(model, pretrained_path)
    logger.info(
        f"Built RSE-Net with {config.num_blocks} residual/SE blocks, {config.num_taps} taps, "
        f"{sum(p.numel() for p in network.parameters())} parameters (seed {seed})"
    )
    return model


def se_block_forward(features: torch.Tensor, params: SEBlock) -> torch.Tensor:
    if features.dim() < 3 or features.shape[-3] != params.channels:
        raise ShapeError(f"SE block expects {params.channels} channels, got features of shape {tuple(features.shape)}")
    return params(features)


def tap_forward(stage_features: torch.Tensor, params: SpecializedTap) -> torch.Tensor:
    if stage_features.dim() < 3 or stage_features.shape[-3] != params.in_channels:
        raise ShapeError(
            f"Tap expects {params.in_channels} channels, got features of shape {tuple(stage_features.shape)}"
        )
    return params(stage_features)


def upsample_to_input(tap: torch.Tensor, stage_stride: int, params: DeconvUpsampler) -> torch.Tensor:
    if stage_stride != params.stride:
        raise ConfigurationError(f"Upsampler was built for stride {params.stride}, asked for {stage_stride}")
    channels = params.steps[0].in_channels
    if tap.dim() < 3 or tap.shape[-3] != channels:
        raise ShapeError(f"Upsampler expects {channels} channels, got tap of shape {tuple(tap.shape)}")
    return params(tap)


def _check_input(channels: np.ndarray) -> None:
    if channels.ndim != 3 or channels.shape[0] != 3:
        raise ShapeError(f"Network input must be 3×H×W, got shape {channels.shape}")
    height, width = channels.shape[1:]
    if height % INPUT_MULTIPLE or width % INPUT_MULTIPLE:
        raise ShapeError(f"Input {height}×{width} is not divisible by {INPUT_MULTIPLE}")


def _to_probabilities(logits: torch.Tensor) -> np.ndarray:
    probabilities = torch.sigmoid(logits).clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
    return probabilities.detach().cpu().numpy()


def forward(model: ModelParams, stack: InputStack) -> ProbabilityMap:
    """
    Evaluate the network on one 2.5D stack.

    Args:
        model (ModelParams): The network to evaluate.
        stack (InputStack): 3×H×W input with H and W divisible by 32.

    Returns:
        ProbabilityMap: H×W sigmoid output, strictly inside (0, 1).
    """
    _check_input(stack.channels)
    network = model.network
    dtype = next(network.parameters()).dtype
    network.eval()
    with torch.no_grad():
        logits = network(torch.as_tensor(stack.channels, dtype=dtype)[None])
    return ProbabilityMap(
        values=_to_probabilities(logits)[0, 0], exam_id=stack.exam_id, slice_index=stack.center_index
    )


def predict_probabilities(
    model: ModelParams, stacks: Sequence[InputStack], batch_size: int = 8
) -> List[ProbabilityMap]:
    """
    Batched inference over stacks of any size ≥ 32; inputs are zero-padded to a multiple of 32
    and the maps cropped back.
    """
    network = model.network
    dtype = next(network.parameters()).dtype
    network.eval()
    maps: List[ProbabilityMap] = []
    for start in range(0, len(stacks), batch_size):
        chunk = stacks[start : start + batch_size]
        shapes = {stack.spatial_shape for stack in chunk}
        if len(shapes) != 1:
            raise ShapeError(f"Stacks in one batch must share a shape, got {sorted(shapes)}")
        height, width = shapes.pop()
        batch = np.stack([pad_to_multiple(stack.channels) for stack in chunk])
        _check_input(batch[0])
        with torch.no_grad():
            logits = network(torch.as_tensor(batch, dtype=dtype))
        values = _to_probabilities(logits)[:, 0, :height, :width]
        maps.extend(
            ProbabilityMap(values=value, exam_id=stack.exam_id, slice_index=stack.center_index)
            for value, stack in zip(values, chunk)
        )
    return maps
