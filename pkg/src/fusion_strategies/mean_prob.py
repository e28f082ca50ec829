from typing import Sequence

import numpy as np

from src.services.voting import binarize
from src.types.exam import Mask, ProbabilityMap
from src.types.fusion_strategy import BaseFusionStrategy


class MeanProbFusionStrategy(BaseFusionStrategy):
    """Average member probabilities, then binarize."""

    def fuse(self, probs: Sequence[ProbabilityMap]) -> Mask:
        self.check_members(probs)
        # canonical summation order: member order must not change rounding
        total = np.zeros(probs[0].shape, dtype=np.float64)
        for prob in sorted(probs, key=lambda p: p.values.tobytes()):
            total += prob.values
        mean = ProbabilityMap(
            values=total / len(probs), exam_id=probs[0].exam_id, slice_index=probs[0].slice_index
        )
        return binarize(mean, self.threshold)
