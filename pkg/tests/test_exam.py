import json

import numpy as np
import pytest

from src.errors import ConsistencyError, ExamFormatError
from src.services.exam import ExamStore, load_exam, read_mask, save_exam, write_mask
from src.services.pgm import read_pgm, write_pgm
from src.types.exam import Exam, Mask, Slice


def write_exam_dir(path, shapes, spacing=(1.25, 1.25), regions=None, masks=False):
    path.mkdir(parents=True, exist_ok=True)
    for index, shape in enumerate(shapes):
        pixels = (np.arange(shape[0] * shape[1]).reshape(shape) * 7 % 65536).astype(np.uint16)
        write_pgm(path / f"slice_{index:03d}.pgm", pixels, maxval=65535)
        if masks:
            mask = np.zeros(shape, dtype=np.uint8)
            mask[2:6, 3:9] = 255
            write_pgm(path / f"mask_{index:03d}.pgm", mask, maxval=255)
    meta = {
        "id": path.name,
        "num_slices": len(shapes),
        "height": shapes[0][0],
        "width": shapes[0][1],
        "pixel_spacing_mm": list(spacing),
        "has_masks": masks,
    }
    if regions is not None:
        meta["regions"] = regions
    (path / "meta.json").write_text(json.dumps(meta))
    return path


def test_pgm_round_trip_16_bit(tmp_path):
    pixels = np.array([[0, 1, 256], [65535, 4660, 513]] * 16, dtype=np.uint16)
    write_pgm(tmp_path / "a.pgm", pixels, maxval=65535)
    loaded = read_pgm(tmp_path / "a.pgm")
    assert loaded.dtype == np.uint16
    assert np.array_equal(loaded, pixels)


def test_pgm_16_bit_samples_are_big_endian(tmp_path):
    write_pgm(tmp_path / "a.pgm", np.array([[0x1234]], dtype=np.uint16), maxval=65535)
    assert (tmp_path / "a.pgm").read_bytes().endswith(b"\x12\x34")


def test_pgm_header_comments_are_skipped(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# a comment\n2 1\n# another\n255\n\x00\xff")
    assert np.array_equal(read_pgm(tmp_path / "c.pgm"), np.array([[0, 255]], dtype=np.uint8))


def test_pgm_truncated_raster_is_a_format_error(tmp_path):
    (tmp_path / "t.pgm").write_bytes(b"P5\n4 4\n255\n\x00\x00")
    with pytest.raises(ExamFormatError):
        read_pgm(tmp_path / "t.pgm")


def test_pgm_wrong_magic_is_a_format_error(tmp_path):
    (tmp_path / "p2.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(ExamFormatError):
        read_pgm(tmp_path / "p2.pgm")


def test_pgm_8_bit_round_trip(tmp_path):
    pixels = np.arange(64, dtype=np.uint8).reshape(8, 8) * 3
    write_pgm(tmp_path / "b.pgm", pixels, maxval=255)
    assert (tmp_path / "b.pgm").read_bytes().startswith(b"P5")
    loaded = read_pgm(tmp_path / "b.pgm")
    assert loaded.dtype == np.uint8
    assert np.array_equal(loaded, pixels)


def test_pgm_write_rejects_unsupported_maxval(tmp_path):
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "x.pgm", np.zeros((2, 2), dtype=np.uint16), maxval=4095)


def test_pgm_missing_file_is_a_format_error(tmp_path):
    with pytest.raises(ExamFormatError):
        read_pgm(tmp_path / "absent.pgm")


def test_mask_pgm_round_trip(tmp_path):
    values = np.zeros((32, 32), dtype=np.uint8)
    values[4:10, 5:7] = 1
    write_mask(tmp_path / "m.pgm", Mask(values=values))
    assert np.array_equal(read_pgm(tmp_path / "m.pgm")[4:10, 5:7], np.full((6, 2), 255))
    assert np.array_equal(read_mask(tmp_path / "m.pgm", "e", 0).values, values)


def test_mask_rejects_non_binary_values(tmp_path):
    write_pgm(tmp_path / "m.pgm", np.full((32, 32), 128, dtype=np.uint8), maxval=255)
    with pytest.raises(ExamFormatError):
        read_mask(tmp_path / "m.pgm", "e", 0)


def test_load_exam_six_slices(tmp_path):
    path = write_exam_dir(tmp_path / "exam_a", [(224, 224)] * 6)
    exam = load_exam(path)
    assert exam.id == "exam_a"
    assert exam.num_slices == 6
    assert exam.shape == (224, 224)
    assert exam.pixel_spacing_mm == (1.25, 1.25)
    assert exam.masks is None
    assert exam.regions == ["base", "base", "middle", "middle", "apex", "apex"]


def test_load_exam_single_slice_without_masks(tmp_path):
    exam = load_exam(write_exam_dir(tmp_path / "one", [(32, 32)]))
    assert exam.num_slices == 1
    assert exam.masks is None


def test_load_exam_keeps_declared_regions(tmp_path):
    exam = load_exam(write_exam_dir(tmp_path / "r", [(32, 32)] * 3, regions=["base", "base", "apex"]))
    assert exam.regions == ["base", "base", "apex"]


def test_load_exam_rejects_mixed_slice_shapes(tmp_path):
    path = write_exam_dir(tmp_path / "mixed", [(224, 224)] * 3 + [(192, 192)])
    with pytest.raises(ConsistencyError):
        load_exam(path)


def test_load_exam_missing_slice_is_a_format_error(tmp_path):
    path = write_exam_dir(tmp_path / "gap", [(32, 32)] * 3)
    (path / "slice_001.pgm").unlink()
    with pytest.raises(ExamFormatError):
        load_exam(path)


def test_load_exam_missing_mask_is_a_consistency_error(tmp_path):
    path = write_exam_dir(tmp_path / "m", [(32, 32)] * 3, masks=True)
    (path / "mask_002.pgm").unlink()
    with pytest.raises(ConsistencyError):
        load_exam(path)


def test_load_exam_bad_meta_names_the_field(tmp_path):
    path = write_exam_dir(tmp_path / "bad", [(32, 32)])
    meta = json.loads((path / "meta.json").read_text())
    meta["num_slices"] = 0
    (path / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(ExamFormatError, match="num_slices"):
        load_exam(path)


def test_load_exam_invalid_json(tmp_path):
    path = write_exam_dir(tmp_path / "broken", [(32, 32)])
    (path / "meta.json").write_text("{not json")
    with pytest.raises(ExamFormatError):
        load_exam(path)


def test_save_then_load_is_bit_exact(tmp_path, phantom_exam):
    loaded = load_exam(save_exam(phantom_exam, tmp_path / "saved"))
    assert loaded.id == phantom_exam.id
    assert loaded.pixel_spacing_mm == phantom_exam.pixel_spacing_mm
    assert loaded.regions == phantom_exam.regions
    for original, item in zip(phantom_exam.slices, loaded.slices):
        assert np.array_equal(original.pixels, item.pixels)
    for original, mask in zip(phantom_exam.masks, loaded.masks):
        assert np.array_equal(original.values, mask.values)


def test_exam_requires_contiguous_indices():
    pixels = np.zeros((32, 32), dtype=np.uint16)
    with pytest.raises(ValueError):
        Exam(id="x", slices=[Slice(pixels=pixels, index=0), Slice(pixels=pixels, index=2)], pixel_spacing_mm=(1, 1))


def test_exam_requires_positive_spacing():
    pixels = np.zeros((32, 32), dtype=np.uint16)
    with pytest.raises(ValueError):
        Exam(id="x", slices=[Slice(pixels=pixels, index=0)], pixel_spacing_mm=(0.0, 1.0))


def test_slice_rejects_small_images():
    with pytest.raises(ValueError):
        Slice(pixels=np.zeros((16, 32), dtype=np.uint16), index=0)


def test_exam_store_loads_by_meta_id(tmp_path, small_exams):
    for exam in small_exams:
        save_exam(exam, tmp_path / f"dir_{exam.id}")
    store = ExamStore(tmp_path, max_workers=2)
    assert store.ids() == sorted(exam.id for exam in small_exams)
    assert len(store) == len(small_exams)
    assert "exam_00" in store
    assert "missing" not in store
    assert store.path("exam_01").name == "dir_exam_01"
    loaded = store.load_all()
    assert [exam.id for exam in loaded] == store.ids()
    assert store["exam_02"] is store.load("exam_02")


def test_exam_store_unknown_id(tmp_path, small_exams):
    save_exam(small_exams[0], tmp_path / "a")
    store = ExamStore(tmp_path)
    with pytest.raises(KeyError):
        store["nope"]
    with pytest.raises(ConsistencyError):
        store.path("nope")


def test_exam_store_from_exams(small_exams):
    store = ExamStore.from_exams(small_exams)
    assert store.ids() == [exam.id for exam in small_exams]
    assert store["exam_03"] is small_exams[3]
