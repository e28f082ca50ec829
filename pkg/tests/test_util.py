import numpy as np

from src.util import assign_regions, is_power_of_two, pad_to_multiple


def test_assign_regions_six_slices():
    assert assign_regions(6) == ["base", "base", "middle", "middle", "apex", "apex"]


def test_assign_regions_seven_slices():
    labels = assign_regions(7)
    assert labels.count("base") == 3
    assert labels.count("apex") == 3
    assert labels.count("middle") == 1


def test_assign_regions_small_stacks():
    assert assign_regions(1) == ["base"]
    assert assign_regions(2) == ["base", "apex"]
    assert assign_regions(3) == ["base", "middle", "apex"]
    assert assign_regions(4) == ["base", "base", "apex", "apex"]


def test_assign_regions_is_ordered():
    order = {"base": 0, "middle": 1, "apex": 2}
    for n in range(1, 20):
        labels = assign_regions(n)
        assert len(labels) == n
        assert [order[label] for label in labels] == sorted(order[label] for label in labels)


def test_pad_to_multiple_pads_trailing_edges():
    array = np.ones((2, 33, 40), dtype=np.float32)
    padded = pad_to_multiple(array, 32)
    assert padded.shape == (2, 64, 64)
    assert padded[:, :33, :40].sum() == array.sum()
    assert padded[:, 33:, :].sum() == 0
    assert padded[:, :, 40:].sum() == 0


def test_pad_to_multiple_leaves_aligned_arrays():
    array = np.ones((64, 32))
    assert pad_to_multiple(array, 32) is array


def test_is_power_of_two():
    assert [n for n in range(1, 40) if is_power_of_two(n)] == [1, 2, 4, 8, 16, 32]
    assert not is_power_of_two(0)
