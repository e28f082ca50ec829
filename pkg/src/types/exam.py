from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.const import RAW_MAXVAL

Region = Literal["base", "middle", "apex", "unknown"]


class Mask(BaseModel):
    """
    Binary segmentation of one slice.

    Attributes:
        values (np.ndarray): H×W array of 0/1 entries (uint8).
        exam_id (str): The exam the slice belongs to.
        slice_index (int): Position of the slice in the base-to-apex stack.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    exam_id: str = ""
    slice_index: int = 0

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.ndim != 2:
            raise ValueError(f"Mask must be 2D, got shape {values.shape}")
        if values.dtype != np.uint8:
            if not np.isin(values, (0, 1)).all():
                raise ValueError("Mask entries must be 0 or 1")
            values = values.astype(np.uint8)
        elif values.size and values.max() > 1:
            raise ValueError("Mask entries must be 0 or 1")
        return values

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


class ProbabilityMap(BaseModel):
    """
    Pre-threshold sigmoid output of one network evaluation.

    Attributes:
        values (np.ndarray): H×W float array, every entry strictly inside (0, 1).
        exam_id (str): The exam the slice belongs to.
        slice_index (int): Position of the slice in the base-to-apex stack.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    exam_id: str = ""
    slice_index: int = 0

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.ndim != 2:
            raise ValueError(f"Probability map must be 2D, got shape {values.shape}")
        if values.size and not (values.min() > 0.0 and values.max() < 1.0):
            raise ValueError("Probability map entries must lie strictly inside (0, 1)")
        return values

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


class Slice(BaseModel):
    """
    One short-axis image.

    Attributes:
        pixels (np.ndarray): Raw uint16 intensities, or float32 z-scores once normalized.
        index (int): 0-based position, base to apex.
        region (Region): Anatomical third of the stack.
        normalized (bool): Whether `pixels` holds z-scored values.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    pixels: np.ndarray
    index: int = Field(ge=0)
    region: Region = "unknown"
    normalized: bool = False

    @model_validator(mode="after")
    def validate_pixels(self) -> "Slice":
        if self.pixels.ndim != 2:
            raise ValueError(f"Slice pixels must be 2D, got shape {self.pixels.shape}")
        if self.height < 32 or self.width < 32:
            raise ValueError(f"Slice must be at least 32×32, got {self.height}×{self.width}")
        if not self.normalized and self.pixels.size:
            if self.pixels.min() < 0 or self.pixels.max() > RAW_MAXVAL:
                raise ValueError(f"Raw intensities must lie in [0, {RAW_MAXVAL}]")
        return self

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


class Exam(BaseModel):
    """
    Base-to-apex short-axis stack of one patient.

    Attributes:
        id (str): Exam identifier.
        slices (List[Slice]): Slices ordered by index, indices contiguous from 0.
        pixel_spacing_mm (Tuple[float, float]): (row, column) spacing in millimetres.
        masks (Optional[List[Mask]]): Reference segmentations aligned 1:1 with slices.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str
    slices: List[Slice]
    pixel_spacing_mm: Tuple[float, float]
    masks: Optional[List[Mask]] = None

    @field_validator("pixel_spacing_mm")
    @classmethod
    def validate_spacing(cls, spacing: Tuple[float, float]) -> Tuple[float, float]:
        if spacing[0] <= 0 or spacing[1] <= 0:
            raise ValueError(f"Pixel spacing must be strictly positive, got {spacing}")
        return spacing

    @model_validator(mode="after")
    def validate_stack(self) -> "Exam":
        if not self.slices:
            raise ValueError("An exam needs at least one slice")
        shape = self.slices[0].pixels.shape
        for position, item in enumerate(self.slices):
            if item.index != position:
                raise ValueError(f"Slice indices must be contiguous from 0; found {item.index} at {position}")
            if item.pixels.shape != shape:
                raise ValueError(f"Slice {item.index} has shape {item.pixels.shape}, expected {shape}")
        if self.masks is not None:
            if len(self.masks) != len(self.slices):
                raise ValueError(f"{len(self.masks)} masks for {len(self.slices)} slices")
            for mask in self.masks:
                if mask.shape != shape:
                    raise ValueError(f"Mask {mask.slice_index} has shape {mask.shape}, expected {shape}")
        return self

    @property
    def num_slices(self) -> int:
        return len(self.slices)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.slices[0].pixels.shape  # type: ignore[return-value]

    @property
    def regions(self) -> List[str]:
        return [item.region for item in self.slices]


class InputStack(BaseModel):
    """
    2.5D network input: normalized slices (i-1, i, i+1) targeting slice i.

    Attributes:
        channels (np.ndarray): 3×H×W float32 array.
        center_index (int): Slice whose mask is the prediction target.
        exam_id (str): The exam the slices come from.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    channels: np.ndarray
    center_index: int
    exam_id: str

    @property
    def spatial_shape(self) -> Tuple[int, int]:
        return self.channels.shape[-2:]  # type: ignore[return-value]


SliceRef = Tuple[str, int]


class DatasetSplit(BaseModel):
    """
    Exam-level train/validation/test partition of slice references.

    Attributes:
        train (List[SliceRef]): (exam_id, slice index) pairs for training.
        validation (List[SliceRef]): Pairs for model selection.
        test (List[SliceRef]): Held-out pairs.
        seed (int): Seed that produced the split.
    """

    train: List[SliceRef]
    validation: List[SliceRef]
    test: List[SliceRef]
    seed: int

    @model_validator(mode="after")
    def validate_disjoint(self) -> "DatasetSplit":
        partitions = [{exam_id for exam_id, _ in part} for part in (self.train, self.validation, self.test)]
        for i in range(3):
            for j in range(i + 1, 3):
                if partitions[i] & partitions[j]:
                    raise ValueError(f"Exams {sorted(partitions[i] & partitions[j])} appear in two partitions")
        return self

    def exam_ids(self, partition: Literal["train", "validation", "test"]) -> List[str]:
        return sorted({exam_id for exam_id, _ in getattr(self, partition)})


class ExamMeta(BaseModel):
    """Schema of an Exam Directory's meta.json."""

    id: str
    num_slices: int = Field(ge=1)
    height: int = Field(ge=32)
    width: int = Field(ge=32)
    pixel_spacing_mm: Tuple[float, float]
    regions: Optional[List[Literal["base", "middle", "apex"]]] = None
    has_masks: bool = False

    @model_validator(mode="after")
    def validate_regions(self) -> "ExamMeta":
        if self.regions is not None and len(self.regions) != self.num_slices:
            raise ValueError(f"regions has {len(self.regions)} entries for {self.num_slices} slices")
        return self
