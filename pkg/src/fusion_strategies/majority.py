from typing import Sequence

from src.services.voting import binarize, majority_vote
from src.types.exam import Mask, ProbabilityMap
from src.types.fusion_strategy import BaseFusionStrategy


class MajorityFusionStrategy(BaseFusionStrategy):
    """Binarize every member, then take the pixelwise majority."""

    def fuse(self, probs: Sequence[ProbabilityMap]) -> Mask:
        self.check_members(probs)
        return majority_vote([binarize(prob, self.threshold) for prob in probs])
