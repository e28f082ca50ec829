import json
import logging
from collections.abc import Mapping
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterator, List, Optional

import numpy as np
from pydantic import ValidationError

from src.const import MASK_FILENAME, MASK_FOREGROUND, MASK_MAXVAL, META_FILENAME, RAW_MAXVAL, SLICE_FILENAME
from src.errors import ConsistencyError, ExamFormatError
from src.services.pgm import read_pgm, write_pgm
from src.types.exam import Exam, ExamMeta, Mask, Slice
from src.util import assign_regions

logger = logging.getLogger(__name__)


def read_meta(path: Path) -> ExamMeta:
    meta_path = Path(path) / META_FILENAME
    try:
        raw = json.loads(meta_path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ExamFormatError(meta_path, f"cannot read metadata ({e.strerror})") from e
    except json.JSONDecodeError as e:
        raise ExamFormatError(meta_path, f"invalid JSON ({e.msg} at line {e.lineno})") from e
    try:
        return ExamMeta.model_validate(raw)
    except ValidationError as e:
        fields = ", ".join(".".join(str(part) for part in err["loc"]) or "<root>" for err in e.errors())
        raise ExamFormatError(meta_path, f"invalid metadata fields: {fields}") from e


def read_mask(path: Path, exam_id: str, index: int) -> Mask:
    values = read_pgm(path)
    if values.dtype != np.uint8 or not np.isin(values, (0, MASK_FOREGROUND)).all():
        raise ExamFormatError(path, f"mask samples must be 0 or {MASK_FOREGROUND} with maxval {MASK_MAXVAL}")
    return Mask(values=(values == MASK_FOREGROUND).astype(np.uint8), exam_id=exam_id, slice_index=index)


def write_mask(path: Path, mask: Mask) -> None:
    write_pgm(path, mask.values.astype(np.uint8) * MASK_FOREGROUND, maxval=MASK_MAXVAL)


def load_exam(path: Path) -> Exam:
    """
    Load an Exam Directory.

    Args:
        path (Path): Directory holding meta.json, slice_NNN.pgm and optionally mask_NNN.pgm.

    Returns:
        Exam: The exam with raw pixels untouched.

    Raises:
        ExamFormatError: If metadata or an image file is missing or malformed.
        ConsistencyError: If slice shapes disagree or masks do not match the slices.
    """
    path = Path(path)
    meta = read_meta(path)

    if meta.regions is not None:
        regions = list(meta.regions)
    else:
        logger.warning(f"Exam {meta.id} has no region labels; assigning by index thirds")
        regions = assign_regions(meta.num_slices)

    slices: List[Slice] = []
    for index in range(meta.num_slices):
        slice_path = path / SLICE_FILENAME.format(index=index)
        pixels = read_pgm(slice_path)
        if pixels.shape != (meta.height, meta.width):
            raise ConsistencyError(
                f"{slice_path}: shape {pixels.shape[0]}×{pixels.shape[1]} "
                f"differs from the declared {meta.height}×{meta.width}"
            )
        slices.append(Slice(pixels=pixels.astype(np.uint16), index=index, region=regions[index]))

    masks: Optional[List[Mask]] = None
    if meta.has_masks:
        mask_paths = sorted(path.glob("mask_*.pgm"))
        if len(mask_paths) != meta.num_slices:
            raise ConsistencyError(f"{path}: {len(mask_paths)} mask files for {meta.num_slices} slices")
        masks = []
        for index in range(meta.num_slices):
            mask_path = path / MASK_FILENAME.format(index=index)
            if not mask_path.exists():
                raise ConsistencyError(f"{path}: missing {mask_path.name}")
            mask = read_mask(mask_path, meta.id, index)
            if mask.shape != (meta.height, meta.width):
                raise ConsistencyError(f"{mask_path}: mask shape {mask.shape} differs from slice shape")
            masks.append(mask)

    return Exam(id=meta.id, slices=slices, pixel_spacing_mm=meta.pixel_spacing_mm, masks=masks)


def save_exam(exam: Exam, path: Path) -> Path:
    """
    Write an exam in the Exam Directory Format.

    Args:
        exam (Exam): A raw (not normalized) exam.
        path (Path): Target directory, created if needed.

    Returns:
        Path: The directory written.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    for item in exam.slices:
        if item.normalized:
            raise ValueError(f"Exam {exam.id}: only raw slices can be saved")
        write_pgm(path / SLICE_FILENAME.format(index=item.index), item.pixels.astype(np.uint16), maxval=RAW_MAXVAL)

    if exam.masks is not None:
        for mask in exam.masks:
            write_mask(path / MASK_FILENAME.format(index=mask.slice_index), mask)

    regions = exam.regions
    height, width = exam.shape
    meta = {
        "id": exam.id,
        "num_slices": exam.num_slices,
        "height": height,
        "width": width,
        "pixel_spacing_mm": list(exam.pixel_spacing_mm),
        "has_masks": exam.masks is not None,
    }
    if "unknown" not in regions:
        meta["regions"] = regions
    (path / META_FILENAME).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return path


class ExamStore(Mapping):
    """
    A directory whose subdirectories are Exam Directories.

    Exams are addressed by their meta.json id; loading is memoized.
    """

    def __init__(self, root: Path, max_workers: int = 4):
        self.root = Path(root)
        self.max_workers = max_workers
        self._paths: Optional[Dict[str, Path]] = None
        self._cache: Dict[str, Exam] = {}

    @classmethod
    def from_exams(cls, exams: List[Exam]) -> "ExamStore":
        store = cls(Path("."))
        store._paths = {}
        store._cache = {exam.id: exam for exam in exams}
        return store

    def _index(self) -> Dict[str, Path]:
        if self._paths is None:
            if not self.root.is_dir():
                raise ExamFormatError(self.root, "exam store directory does not exist")
            paths = {}
            for directory in sorted(self.root.iterdir()):
                if (directory / META_FILENAME).is_file():
                    paths[read_meta(directory).id] = directory
            self._paths = paths
        return self._paths

    def ids(self) -> List[str]:
        return sorted(set(self._index()) | set(self._cache))

    def path(self, exam_id: str) -> Path:
        try:
            return self._index()[exam_id]
        except KeyError:
            raise ConsistencyError(f"Exam {exam_id} not found under {self.root}") from None

    def load(self, exam_id: str) -> Exam:
        if exam_id not in self._cache:
            self._cache[exam_id] = load_exam(self.path(exam_id))
        return self._cache[exam_id]

    def __getitem__(self, exam_id: str) -> Exam:
        if exam_id not in self:
            raise KeyError(exam_id)
        return self.load(exam_id)

    def __contains__(self, exam_id: object) -> bool:
        return exam_id in self._cache or exam_id in self._index()

    def __iter__(self) -> Iterator[str]:
        return iter(self.ids())

    def __len__(self) -> int:
        return len(self.ids())

    def load_all(self) -> List[Exam]:
        missing = [exam_id for exam_id in self.ids() if exam_id not in self._cache]
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            for exam in pool.map(lambda exam_id: load_exam(self.path(exam_id)), missing):
                self._cache[exam.id] = exam
        return [self._cache[exam_id] for exam_id in self.ids()]
