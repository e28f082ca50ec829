import logging
import math
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from src.const import NORMALIZE_STD_FLOOR
from src.errors import BoundsError, ConsistencyError, InsufficientDataError, PreconditionError
from src.types.exam import DatasetSplit, Exam, InputStack, Mask, Slice, SliceRef

logger = logging.getLogger(__name__)


def normalize_slice(item: Slice) -> Slice:
    """
    Z-score a slice over its own pixels.

    Constant slices (standard deviation below 1e-8) map to all zeros.

    Args:
        item (Slice): A raw or already normalized slice.

    Returns:
        Slice: A normalized copy with float32 pixels.
    """
    pixels = item.pixels.astype(np.float64)
    mean = pixels.mean()
    std = pixels.std()
    if std < NORMALIZE_STD_FLOOR:
        normalized = np.zeros_like(pixels)
    else:
        normalized = (pixels - mean) / std
    return Slice(pixels=normalized.astype(np.float32), index=item.index, region=item.region, normalized=True)


def normalize_exam(exam: Exam) -> Exam:
    return exam.model_copy(update={"slices": [normalize_slice(item) for item in exam.slices]})


def stack_25d(exam: Exam, center_index: int) -> InputStack:
    """
    Build the 3-channel input for one slice from its neighbours.

    Neighbours outside the stack are replaced by the edge slice, so index 0 stacks (0, 0, 1)
    and the last index n-1 stacks (n-2, n-1, n-1).

    Args:
        exam (Exam): A normalized exam.
        center_index (int): Slice whose mask is the target.

    Returns:
        InputStack: channels [slice[i-1], slice[i], slice[i+1]].
    """
    n = exam.num_slices
    if not 0 <= center_index < n:
        raise BoundsError(f"Slice index {center_index} out of range for exam {exam.id} with {n} slices")
    if not all(item.normalized for item in exam.slices):
        raise PreconditionError(f"Exam {exam.id} must be normalized before stacking")

    below = max(center_index - 1, 0)
    above = min(center_index + 1, n - 1)
    channels = np.stack([exam.slices[i].pixels for i in (below, center_index, above)])
    return InputStack(channels=channels, center_index=center_index, exam_id=exam.id)


def split_dataset(exams: Sequence[Exam], fractions: Tuple[float, float], seed: int) -> DatasetSplit:
    """
    Partition exams into train/validation/test at the exam level.

    Exams are ordered by id, then shuffled with `seed`; train and validation take
    round(fraction * n) exams each (at least one), the rest is test.

    Args:
        exams (Sequence[Exam]): At least three exams.
        fractions (Tuple[float, float]): Train and validation fractions, positive, summing below 1.
        seed (int): Shuffle seed.

    Returns:
        DatasetSplit: Slice references per partition.
    """
    train_fraction, validation_fraction = fractions
    if train_fraction <= 0 or validation_fraction <= 0 or train_fraction + validation_fraction >= 1:
        raise PreconditionError(f"Fractions must be positive and sum below 1, got {fractions}")
    n = len(exams)
    if n < 3:
        raise InsufficientDataError(f"Need at least 3 exams for a three-way split, got {n}")

    ordered = sorted(exams, key=lambda exam: exam.id)
    order = np.random.default_rng(seed).permutation(n)

    n_train = max(1, math.floor(train_fraction * n + 0.5))
    n_validation = max(1, math.floor(validation_fraction * n + 0.5))
    # the test partition keeps at least one exam
    while n_train + n_validation > n - 1:
        if n_train >= n_validation and n_train > 1:
            n_train -= 1
        elif n_validation > 1:
            n_validation -= 1
        else:
            break

    def refs(indices: Iterable[int]) -> List[SliceRef]:
        chosen = sorted((ordered[i] for i in indices), key=lambda exam: exam.id)
        return [(exam.id, item.index) for exam in chosen for item in exam.slices]

    split = DatasetSplit(
        train=refs(order[:n_train]),
        validation=refs(order[n_train : n_train + n_validation]),
        test=refs(order[n_train + n_validation :]),
        seed=seed,
    )
    logger.info(
        f"Split {n} exams into {n_train} train / {n_validation} validation / {n - n_train - n_validation} test"
    )
    return split


def build_training_pairs(refs: Sequence[SliceRef], exams: Mapping[str, Exam]) -> List[Tuple[InputStack, Mask]]:
    """
    Turn slice references into (InputStack, Mask) pairs, normalizing each exam once.

    Args:
        refs (Sequence[SliceRef]): (exam_id, slice index) pairs.
        exams (Mapping[str, Exam]): Raw exams by id; every referenced exam needs masks.

    Returns:
        List[Tuple[InputStack, Mask]]: Pairs in the order of `refs`.
    """
    normalized: Dict[str, Exam] = {}
    pairs = []
    for exam_id, index in refs:
        if exam_id not in normalized:
            if exam_id not in exams:
                raise ConsistencyError(f"Exam {exam_id} is referenced by the split but not available")
            exam = exams[exam_id]
            if exam.masks is None:
                raise ConsistencyError(f"Exam {exam_id} has no reference masks to train against")
            normalized[exam_id] = normalize_exam(exam)
        exam = normalized[exam_id]
        pairs.append((stack_25d(exam, index), exam.masks[index]))  # type: ignore[index]
    return pairs
