from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Literal, Sequence

from pydantic import BaseModel, Field, model_validator

from src.const import DEFAULT_THRESHOLD
from src.errors import ShapeError
from src.types.exam import Mask, ProbabilityMap

FusionStrategyName = Literal["majority", "mean_prob", "max_prob"]


class EnsembleSpec(BaseModel):
    """
    Late-fusion ensemble description, stored as ensemble.json.

    Attributes:
        members (List[Path]): Member checkpoint paths; relative paths resolve against the spec file's directory.
        strategy (FusionStrategyName): How member outputs are combined.
        threshold (float): Binarization threshold in (0, 1).
    """

    members: List[Path] = Field(min_length=1)
    strategy: FusionStrategyName = "majority"
    threshold: float = Field(default=DEFAULT_THRESHOLD, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def validate_member_count(self) -> "EnsembleSpec":
        if self.strategy == "majority" and len(self.members) % 2 == 0:
            raise ValueError(f"Majority voting needs an odd number of members, got {len(self.members)}")
        return self


class BaseFusionStrategy(ABC):
    """
    Base class for pixel-level late fusion of member probability maps.
    """

    def __init__(self, threshold: float = DEFAULT_THRESHOLD) -> None:
        self.threshold = threshold

    @staticmethod
    def check_members(probs: Sequence[ProbabilityMap]) -> None:
        if not probs:
            raise ValueError("Fusion needs at least one member output")
        shapes = {prob.shape for prob in probs}
        if len(shapes) != 1:
            raise ShapeError(f"Member outputs differ in shape: {sorted(shapes)}")

    @abstractmethod
    def fuse(self, probs: Sequence[ProbabilityMap]) -> Mask:
        """
        Combine member probability maps into one mask.

        Args:
            probs (Sequence[ProbabilityMap]): One map per member, identical shapes.

        Returns:
            Mask: The fused segmentation.
        """
        pass
