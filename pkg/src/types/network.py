from typing import TYPE_CHECKING, Dict, Literal, Tuple

import torch
from pydantic import BaseModel, ConfigDict, Field

from src.errors import ConfigurationError

if TYPE_CHECKING:
    from src.network.rse_net import RSENet


class NetworkConfig(BaseModel):
    """
    RSE-Net parameterization.

    Attributes:
        input_channels (int): Always 3 (slices i-1, i, i+1).
        stem_channels (int): Width of the stride-4 stem.
        stage_block_counts (Tuple[int, int, int, int]): Residual blocks per stage; [3, 4, 6, 3] is the ResNet50 layout.
        stage_channels (Tuple[int, int, int, int]): Output width of each stage.
        se_reduction (int): Squeeze-and-excitation reduction ratio r.
        tap_channels (int): Width k of every specialized tap layer.
        head_classes (int): Always 1 (myocardium vs background).
        tap_every_block (bool): Tap every residual block instead of only the stage outputs.
        auxiliary_heads (bool): Add a 1×1 prediction head per tap for deep supervision.
    """

    model_config = ConfigDict(frozen=True)

    input_channels: Literal[3] = 3
    stem_channels: int = Field(default=64, ge=1)
    stage_block_counts: Tuple[int, int, int, int] = (3, 4, 6, 3)
    stage_channels: Tuple[int, int, int, int] = (256, 512, 1024, 2048)
    se_reduction: int = Field(default=16, ge=1)
    tap_channels: int = Field(default=16, ge=1)
    head_classes: Literal[1] = 1
    tap_every_block: bool = False
    auxiliary_heads: bool = False

    def check_stages(self) -> None:
        """
        Raises:
            ConfigurationError: If a stage has no blocks or a width that se_reduction does not divide.
        """
        if any(count < 1 for count in self.stage_block_counts):
            raise ConfigurationError(f"Every stage needs at least one block, got {self.stage_block_counts}")
        for channels in self.stage_channels:
            if channels < 1 or channels % self.se_reduction != 0:
                raise ConfigurationError(
                    f"Stage width {channels} is not a positive multiple of se_reduction {self.se_reduction}"
                )

    @classmethod
    def tiny(cls, **overrides) -> "NetworkConfig":
        values = dict(
            stem_channels=8,
            stage_block_counts=(1, 1, 1, 1),
            stage_channels=(16, 32, 64, 128),
            se_reduction=4,
            tap_channels=16,
        )
        values.update(overrides)
        return cls(**values)

    @property
    def num_blocks(self) -> int:
        return sum(self.stage_block_counts)

    @property
    def num_taps(self) -> int:
        return self.num_blocks if self.tap_every_block else len(self.stage_block_counts)


class ModelParams(BaseModel):
    """
    An initialized or trained network together with the configuration and seed that built it.

    Attributes:
        config (NetworkConfig): Architecture.
        network (RSENet): The torch module holding every layer weight.
        seed (int): Initialization seed.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: NetworkConfig
    network: torch.nn.Module
    seed: int = 0

    @property
    def parameters(self) -> Dict[str, torch.Tensor]:
        return dict(self.network.named_parameters())
