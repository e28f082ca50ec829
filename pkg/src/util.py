import math
from typing import List

import numpy as np

from src.const import INPUT_MULTIPLE


def assign_regions(n_slices: int) -> List[str]:
    """
    Assign base/middle/apex labels to a base-to-apex stack by index thirds.

    The first ceil(n/3) slices are base, the last ceil(n/3) of the remaining slices are
    apex, and whatever is left in between is middle.

    Args:
        n_slices (int): Number of slices in the stack.

    Returns:
        List[str]: One region label per slice.

    Example:
        >>> assign_regions(6)
        ['base', 'base', 'middle', 'middle', 'apex', 'apex']
    """
    third = math.ceil(n_slices / 3)
    n_base = min(third, n_slices)
    n_apex = min(third, n_slices - n_base)
    n_middle = n_slices - n_base - n_apex
    return ["base"] * n_base + ["middle"] * n_middle + ["apex"] * n_apex


def pad_to_multiple(array: np.ndarray, multiple: int = INPUT_MULTIPLE) -> np.ndarray:
    """
    Zero-pad the last two axes of an array up to the next multiple.

    Args:
        array (np.ndarray): Array of shape (..., H, W).
        multiple (int): Target divisor for H and W.

    Returns:
        np.ndarray: The padded array; the input itself when no padding is needed.
    """
    height, width = array.shape[-2:]
    pad_h = -height % multiple
    pad_w = -width % multiple
    if pad_h == 0 and pad_w == 0:
        return array
    pad = [(0, 0)] * (array.ndim - 2) + [(0, pad_h), (0, pad_w)]
    return np.pad(array, pad, mode="constant", constant_values=0)


def is_power_of_two(value: int) -> bool:
    return value > 0 and value & (value - 1) == 0
