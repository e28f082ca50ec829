import json
import logging
import math
from pathlib import Path
from typing import List, Tuple

import numpy as np

from src.const import RAW_MAXVAL
from src.errors import BoundsError
from src.services.exam import save_exam
from src.types.exam import Exam, Mask, Slice
from src.types.phantom import PhantomParams, ScarArc
from src.util import assign_regions

logger = logging.getLogger(__name__)


def _radius_scale(params: PhantomParams, slice_index: int) -> float:
    if params.n_slices == 1:
        return 1.0
    return 1.0 - (1.0 - params.apex_scale) * slice_index / (params.n_slices - 1)


def _polar_grid(params: PhantomParams) -> Tuple[np.ndarray, np.ndarray]:
    height, width = params.image_size
    center_row, center_col = params.ring_center
    rows, cols = np.meshgrid(np.arange(height, dtype=np.float64), np.arange(width, dtype=np.float64), indexing="ij")
    d_row = rows - center_row
    d_col = cols - center_col
    distance = np.sqrt(d_row * d_row + d_col * d_col)
    # counter-clockwise with rows pointing down
    angle = np.mod(np.arctan2(-d_row, d_col), 2 * math.pi)
    return distance, angle


def analytic_annulus_mask(params: PhantomParams, slice_index: int) -> Mask:
    """
    Ground-truth myocardium: pixels whose center lies between the scaled inner and outer radii (inclusive).
    """
    if not 0 <= slice_index < params.n_slices:
        raise BoundsError(f"Slice index {slice_index} out of range for a {params.n_slices}-slice phantom")
    scale = _radius_scale(params, slice_index)
    distance, _ = _polar_grid(params)
    ring = (distance >= params.inner_radius_px * scale) & (distance <= params.outer_radius_px * scale)
    return Mask(values=ring.astype(np.uint8), exam_id=params.id, slice_index=slice_index)


def _in_arc(angle: np.ndarray, arc: ScarArc) -> np.ndarray:
    start = arc.start_angle % (2 * math.pi)
    end = arc.end_angle % (2 * math.pi)
    if start <= end:
        return (angle >= start) & (angle <= end)
    return (angle >= start) | (angle <= end)


def generate_phantom_exam(params: PhantomParams) -> Exam:
    """
    Render a synthetic short-axis stack with analytic masks.

    Each slice has a bright blood pool inside the inner radius, a darker myocardial ring, optional
    scar arcs inside the ring at near-blood intensity, a uniform background and Gaussian noise.
    The result is deterministic given `params.seed`.
    """
    rng = np.random.default_rng(params.seed)
    distance, angle = _polar_grid(params)
    regions = assign_regions(params.n_slices)

    slices: List[Slice] = []
    masks: List[Mask] = []
    for index in range(params.n_slices):
        mask = analytic_annulus_mask(params, index)
        ring = mask.values.astype(bool)
        blood = distance < params.inner_radius_px * _radius_scale(params, index)

        image = np.full(params.image_size, params.background_intensity, dtype=np.float64)
        image[blood] = params.blood_intensity
        image[ring] = params.myo_intensity
        for arc in params.scar_arcs:
            image[ring & _in_arc(angle, arc)] = arc.intensity
        if params.noise_sigma > 0:
            image += rng.normal(0.0, params.noise_sigma, size=image.shape)

        pixels = np.clip(np.rint(image), 0, RAW_MAXVAL).astype(np.uint16)
        slices.append(Slice(pixels=pixels, index=index, region=regions[index]))
        masks.append(mask)

    return Exam(id=params.id, slices=slices, pixel_spacing_mm=params.pixel_spacing_mm, masks=masks)


def random_phantom_params(rng: np.random.Generator, size: Tuple[int, int] = (64, 64), seed: int = 0) -> PhantomParams:
    """
    Draw one exam's geometry and contrast: jittered center, radii proportional to the image size,
    and a scar arc on about half of the exams.
    """
    height, width = size
    extent = min(height, width)
    outer = extent * rng.uniform(0.18, 0.26)
    inner = outer * rng.uniform(0.5, 0.65)
    jitter = extent * 0.05
    center = ((height - 1) / 2.0 + rng.uniform(-jitter, jitter), (width - 1) / 2.0 + rng.uniform(-jitter, jitter))
    blood = rng.uniform(26000, 34000)

    scar_arcs = []
    if rng.random() < 0.5:
        start = rng.uniform(0, 2 * math.pi)
        scar_arcs.append(
            ScarArc(
                start_angle=start,
                end_angle=start + rng.uniform(0.4, 1.2),
                intensity=blood * rng.uniform(0.85, 0.95),
            )
        )

    return PhantomParams(
        image_size=size,
        center=center,
        inner_radius_px=inner,
        outer_radius_px=outer,
        blood_intensity=blood,
        myo_intensity=rng.uniform(6000, 10000),
        background_intensity=rng.uniform(14000, 18000),
        scar_arcs=scar_arcs,
        noise_sigma=rng.uniform(300, 800),
        seed=seed,
    )


def write_phantom_dataset(out_dir: Path, count: int, seed: int, size: Tuple[int, int] = (64, 64)) -> Path:
    """
    Write `count` phantom Exam Directories plus a manifest.json listing them.

    Returns:
        Path: The manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    exam_seeds = rng.integers(0, 2**31 - 1, size=count)

    exams = []
    for i, exam_seed in enumerate(exam_seeds):
        params = random_phantom_params(rng, size=size, seed=int(exam_seed))
        params = params.model_copy(update={"exam_id": f"phantom_{i:03d}"})
        exam = generate_phantom_exam(params)
        save_exam(exam, out_dir / exam.id)
        exams.append({"id": exam.id, "path": exam.id, "seed": int(exam_seed)})

    manifest = out_dir / "manifest.json"
    manifest.write_text(
        json.dumps({"seed": seed, "size": list(size), "exams": exams}, indent=2) + "\n", encoding="utf-8"
    )
    logger.info(f"Wrote {count} phantom exams to {out_dir}")
    return manifest
