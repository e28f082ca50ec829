from typing import Sequence

import numpy as np

from src.errors import ConfigurationError, ShapeError
from src.types.exam import Mask, ProbabilityMap


def binarize(prob: ProbabilityMap, threshold: float) -> Mask:
    """Foreground where the probability is strictly above `threshold`; a tie goes to background."""
    if not 0.0 < threshold < 1.0:
        raise ConfigurationError(f"Threshold must lie in (0, 1), got {threshold}")
    return Mask(
        values=(prob.values > threshold).astype(np.uint8),
        exam_id=prob.exam_id,
        slice_index=prob.slice_index,
    )


def majority_vote(masks: Sequence[Mask]) -> Mask:
    """
    Pixelwise majority over an odd number of masks.

    Raises:
        ConfigurationError: If the member count is zero or even.
        ShapeError: If the masks differ in shape.
    """
    if len(masks) == 0 or len(masks) % 2 == 0:
        raise ConfigurationError(f"Majority vote needs an odd number of members, got {len(masks)}")
    shapes = {mask.shape for mask in masks}
    if len(shapes) != 1:
        raise ShapeError(f"Member masks differ in shape: {sorted(shapes)}")
    votes = np.sum([mask.values.astype(np.int64) for mask in masks], axis=0)
    return Mask(
        values=(votes > len(masks) // 2).astype(np.uint8),
        exam_id=masks[0].exam_id,
        slice_index=masks[0].slice_index,
    )
