from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.const import RAW_MAXVAL


class ScarArc(BaseModel):
    """Bright enhancement inside the myocardial ring between two angles (radians, counter-clockwise)."""

    model_config = ConfigDict(frozen=True)

    start_angle: float
    end_angle: float
    intensity: float = Field(ge=0, le=RAW_MAXVAL)


class PhantomParams(BaseModel):
    """
    Synthetic LGE-like exam description.

    Attributes:
        image_size (Tuple[int, int]): (H, W) of every slice.
        n_slices (int): Base-to-apex slice count.
        center (Optional[Tuple[float, float]]): Subpixel (row, col) of the ring center; the image center by default.
        inner_radius_px (float): Endocardial radius at the base slice.
        outer_radius_px (float): Epicardial radius at the base slice.
        blood_intensity (float): Blood pool intensity.
        myo_intensity (float): Healthy myocardium intensity.
        background_intensity (float): Everything outside the epicardium.
        scar_arcs (List[ScarArc]): Enhanced arcs inside the ring.
        noise_sigma (float): Standard deviation of the additive Gaussian noise.
        apex_scale (float): Radius scale reached at the apex slice; radii shrink linearly from the base.
        pixel_spacing_mm (Tuple[float, float]): Spacing written into the exam.
        exam_id (Optional[str]): Defaults to phantom_<seed>.
        seed (int): Noise seed.
    """

    model_config = ConfigDict(frozen=True)

    image_size: Tuple[int, int] = (64, 64)
    n_slices: int = Field(default=6, ge=1)
    center: Optional[Tuple[float, float]] = None
    inner_radius_px: float = Field(default=8.0, gt=0)
    outer_radius_px: float = Field(default=14.0, gt=0)
    blood_intensity: float = Field(default=30000.0, ge=0, le=RAW_MAXVAL)
    myo_intensity: float = Field(default=8000.0, ge=0, le=RAW_MAXVAL)
    background_intensity: float = Field(default=16000.0, ge=0, le=RAW_MAXVAL)
    scar_arcs: List[ScarArc] = []
    noise_sigma: float = Field(default=500.0, ge=0)
    apex_scale: float = Field(default=0.6, gt=0, le=1)
    pixel_spacing_mm: Tuple[float, float] = (1.25, 1.25)
    exam_id: Optional[str] = None
    seed: int = 0

    @model_validator(mode="after")
    def validate_geometry(self) -> "PhantomParams":
        height, width = self.image_size
        if height < 32 or width < 32:
            raise ValueError(f"Phantom slices must be at least 32×32, got {height}×{width}")
        if not self.inner_radius_px < self.outer_radius_px < min(height, width) / 2:
            raise ValueError(
                f"Need 0 < inner_radius ({self.inner_radius_px}) < outer_radius ({self.outer_radius_px}) "
                f"< min(H, W)/2 ({min(height, width) / 2})"
            )
        return self

    @property
    def ring_center(self) -> Tuple[float, float]:
        if self.center is not None:
            return self.center
        height, width = self.image_size
        return (height - 1) / 2.0, (width - 1) / 2.0

    @property
    def id(self) -> str:
        return self.exam_id or f"phantom_{self.seed:04d}"
