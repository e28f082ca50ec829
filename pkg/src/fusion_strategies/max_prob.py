from typing import Sequence

import numpy as np

from src.services.voting import binarize
from src.types.exam import Mask, ProbabilityMap
from src.types.fusion_strategy import BaseFusionStrategy


class MaxProbFusionStrategy(BaseFusionStrategy):
    """Pixelwise maximum of member probabilities, then binarize."""

    def fuse(self, probs: Sequence[ProbabilityMap]) -> Mask:
        self.check_members(probs)
        peak = np.max([prob.values for prob in probs], axis=0)
        return binarize(
            ProbabilityMap(values=peak, exam_id=probs[0].exam_id, slice_index=probs[0].slice_index),
            self.threshold,
        )
