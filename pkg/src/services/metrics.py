from typing import Optional, Set, Tuple, Union

import numpy as np
from scipy import ndimage
from scipy.spatial.distance import cdist

from src.errors import ShapeError
from src.types.exam import Mask

MaskLike = Union[Mask, np.ndarray]
Spacing = Tuple[float, float]

# 4-connectivity structuring element
_CROSS = ndimage.generate_binary_structure(2, 1)


def _as_bool(mask: MaskLike) -> np.ndarray:
    values = mask.values if isinstance(mask, Mask) else np.asarray(mask)
    return values.astype(bool)


def _pair(a: MaskLike, b: MaskLike) -> Tuple[np.ndarray, np.ndarray]:
    a_values, b_values = _as_bool(a), _as_bool(b)
    if a_values.shape != b_values.shape:
        raise ShapeError(f"Mask shapes differ: {a_values.shape} vs {b_values.shape}")
    return a_values, b_values


def dice(a: MaskLike, b: MaskLike) -> float:
    """
    Dice similarity coefficient 2|A∩B| / (|A|+|B|); two empty masks score 1.0.
    """
    a_values, b_values = _pair(a, b)
    total = int(a_values.sum()) + int(b_values.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a_values, b_values).sum()) / total


def _boundary_mask(values: np.ndarray) -> np.ndarray:
    # pixels outside the image count as background
    eroded = ndimage.binary_erosion(values, structure=_CROSS, border_value=0)
    return values & ~eroded


def boundary_pixels(mask: MaskLike) -> Set[Tuple[int, int]]:
    """Foreground pixels with at least one 4-neighbour that is background or outside the image."""
    rows, cols = np.nonzero(_boundary_mask(_as_bool(mask)))
    return {(int(r), int(c)) for r, c in zip(rows, cols)}


def _boundary_points_mm(values: np.ndarray, spacing: Spacing) -> np.ndarray:
    rows, cols = np.nonzero(_boundary_mask(values))
    return np.column_stack([rows * float(spacing[0]), cols * float(spacing[1])])


def hausdorff_mm(a: MaskLike, b: MaskLike, spacing: Spacing) -> Optional[float]:
    """
    Symmetric Hausdorff distance between the boundaries of two masks, in millimetres.

    Args:
        a (MaskLike): First mask.
        b (MaskLike): Second mask.
        spacing (Spacing): (row, column) pixel spacing in mm.

    Returns:
        Optional[float]: The distance; 0.0 when both masks are empty, None when exactly one is.
    """
    if spacing[0] <= 0 or spacing[1] <= 0:
        raise ValueError(f"Pixel spacing must be positive, got {spacing}")
    a_values, b_values = _pair(a, b)
    a_empty, b_empty = not a_values.any(), not b_values.any()
    if a_empty and b_empty:
        return 0.0
    if a_empty or b_empty:
        return None

    distances = cdist(_boundary_points_mm(a_values, spacing), _boundary_points_mm(b_values, spacing))
    return float(max(distances.min(axis=1).max(), distances.min(axis=0).max()))


def surface_area_mm2(mask: MaskLike, spacing: Spacing) -> float:
    return float(_as_bool(mask).sum()) * float(spacing[0]) * float(spacing[1])
