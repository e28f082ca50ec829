"""Binary PGM (P5) I/O for 8-bit masks and 16-bit slices, backed by OpenCV."""

import logging
from pathlib import Path

import cv2
import numpy as np

from src.errors import ExamFormatError

logger = logging.getLogger(__name__)

_DTYPES = {255: np.uint8, 65535: np.uint16}


def read_pgm(path: Path) -> np.ndarray:
    """
    Read a binary PGM file.

    Args:
        path (Path): File to read.

    Returns:
        np.ndarray: H×W array, uint8 for maxval 255 and uint16 for maxval 65535.

    Raises:
        ExamFormatError: If the file is missing or not a well-formed P5 image.
    """
    path = Path(path)
    try:
        with path.open("rb") as f:
            magic = f.read(2)
    except OSError as e:
        raise ExamFormatError(path, f"cannot read file ({e.strerror})") from e
    if magic != b"P5":
        raise ExamFormatError(path, f"expected PGM magic P5, found {magic!r}")

    pixels = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if pixels is None or pixels.ndim != 2:
        raise ExamFormatError(path, "malformed or truncated PGM image")
    # the raster alone must fit in the file
    if path.stat().st_size < pixels.nbytes:
        raise ExamFormatError(path, f"truncated raster: file holds fewer than {pixels.nbytes} raster bytes")
    return pixels


def write_pgm(path: Path, pixels: np.ndarray, maxval: int) -> None:
    """
    Write a binary PGM file.

    Args:
        path (Path): Destination file, with a .pgm suffix.
        pixels (np.ndarray): H×W integer array with entries in [0, maxval].
        maxval (int): 255 for 8-bit images or 65535 for 16-bit big-endian images.

    Raises:
        ValueError: If the array or maxval cannot be stored as PGM.
        OSError: If OpenCV fails to write the file.
    """
    if maxval not in _DTYPES:
        raise ValueError(f"PGM maxval must be one of {sorted(_DTYPES)}, got {maxval}")
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"PGM images are 2D, got shape {pixels.shape}")
    if pixels.size and (pixels.min() < 0 or pixels.max() > maxval):
        raise ValueError(f"PGM samples must lie in [0, {maxval}]")

    path = Path(path)
    if not cv2.imwrite(str(path), np.ascontiguousarray(pixels, dtype=_DTYPES[maxval]), [cv2.IMWRITE_PXM_BINARY, 1]):
        raise OSError(f"OpenCV could not write {path}")
    logger.debug(f"Wrote {pixels.shape[0]}×{pixels.shape[1]} PGM (maxval {maxval}) to {path}")
