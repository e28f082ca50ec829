import itertools
from pathlib import Path

import numpy as np
import pytest

from src.const import CHECKPOINT_MAGIC
from src.errors import ConfigurationError, DependencyError, ShapeError
from src.fusion_strategies import get_fusion_strategy, strategies
from src.network import build_network, forward, save_checkpoint
from src.services.ensemble import Ensemble, fuse_ensemble, load_ensemble_spec, save_ensemble_spec
from src.services.voting import binarize, majority_vote
from src.types.exam import InputStack, Mask, ProbabilityMap
from src.types.fusion_strategy import EnsembleSpec
from src.types.network import NetworkConfig


def constant_map(value: float, shape=(4, 4)) -> ProbabilityMap:
    return ProbabilityMap(values=np.full(shape, value))


@pytest.fixture
def stack():
    channels = np.random.default_rng(0).standard_normal((3, 32, 32)).astype(np.float32)
    return InputStack(channels=channels, center_index=1, exam_id="e")


@pytest.fixture
def checkpoints(tmp_path):
    paths = []
    for seed in range(3):
        paths.append(save_checkpoint(build_network(NetworkConfig.tiny(), seed=seed), tmp_path / f"m{seed}.ckpt"))
    return paths


def test_binarize_uniform_above_threshold():
    assert binarize(constant_map(0.9), 0.5).values.all()


def test_binarize_tie_is_background():
    assert not binarize(constant_map(0.5), 0.5).values.any()


def test_binarize_checkerboard():
    checker = np.indices((6, 6)).sum(axis=0) % 2
    prob = ProbabilityMap(values=np.where(checker == 1, 0.8, 0.2))
    assert np.array_equal(binarize(prob, 0.5).values, checker)


def test_binarize_rejects_thresholds_outside_unit_interval():
    with pytest.raises(ConfigurationError):
        binarize(constant_map(0.3), 1.0)


def test_majority_vote_truth_table():
    # every assignment of 3 votes to each pixel of a 2×2 grid
    for bits in itertools.product((0, 1), repeat=12):
        votes = np.array(bits, dtype=np.uint8).reshape(3, 2, 2)
        fused = majority_vote([Mask(values=v) for v in votes])
        assert np.array_equal(fused.values, (votes.sum(axis=0) >= 2).astype(np.uint8))


def test_majority_vote_is_symmetric():
    rng = np.random.default_rng(1)
    masks = [Mask(values=rng.integers(0, 2, size=(8, 8))) for _ in range(3)]
    expected = majority_vote(masks).values
    for order in itertools.permutations(masks):
        assert np.array_equal(majority_vote(list(order)).values, expected)


def test_majority_vote_of_identical_masks():
    mask = Mask(values=np.random.default_rng(2).integers(0, 2, size=(8, 8)))
    assert np.array_equal(majority_vote([mask, mask, mask]).values, mask.values)


def test_majority_vote_is_monotone():
    rng = np.random.default_rng(3)
    masks = [rng.integers(0, 2, size=(8, 8)).astype(np.uint8) for _ in range(3)]
    before = majority_vote([Mask(values=m) for m in masks]).values
    masks[0] = masks[0] | rng.integers(0, 2, size=(8, 8)).astype(np.uint8)
    after = majority_vote([Mask(values=m) for m in masks]).values
    assert (after >= before).all()


def test_majority_vote_needs_odd_members():
    mask = Mask(values=np.zeros((4, 4)))
    with pytest.raises(ConfigurationError):
        majority_vote([mask, mask])
    with pytest.raises(ConfigurationError):
        majority_vote([])


def test_majority_vote_shape_mismatch():
    with pytest.raises(ShapeError):
        majority_vote([Mask(values=np.zeros((4, 4))), Mask(values=np.zeros((4, 4))), Mask(values=np.zeros((4, 5)))])


@pytest.mark.parametrize("name", sorted(strategies))
def test_unanimous_members_agree_under_every_strategy(name):
    fused = get_fusion_strategy(name).fuse([constant_map(0.9)] * 3)
    assert fused.values.all()


def test_strategies_can_differ():
    probs = [constant_map(0.6), constant_map(0.6), constant_map(0.1)]
    assert get_fusion_strategy("majority").fuse(probs).values.all()
    assert not get_fusion_strategy("mean_prob").fuse(probs).values.any()
    assert get_fusion_strategy("max_prob").fuse(probs).values.all()


def test_mean_prob_ignores_member_order():
    rng = np.random.default_rng(4)
    probs = [ProbabilityMap(values=rng.uniform(0.01, 0.99, size=(16, 16))) for _ in range(3)]
    strategy = get_fusion_strategy("mean_prob", threshold=0.5)
    expected = strategy.fuse(probs).values
    for order in itertools.permutations(probs):
        assert np.array_equal(strategy.fuse(list(order)).values, expected)


def test_unknown_strategy():
    assert get_fusion_strategy("median") is None


def test_ensemble_spec_rejects_even_majority():
    with pytest.raises(ValueError):
        EnsembleSpec(members=["a.ckpt", "b.ckpt"])
    assert EnsembleSpec(members=["a.ckpt", "b.ckpt"], strategy="mean_prob").threshold == 0.5


def test_ensemble_spec_round_trip_keeps_relative_paths(tmp_path):
    spec = EnsembleSpec(members=["run_00/best.ckpt", "run_01/best.ckpt", "run_02/best.ckpt"])
    loaded = load_ensemble_spec(save_ensemble_spec(spec, tmp_path / "ensemble.json"))
    assert loaded == spec
    assert loaded.members[0] == Path("run_00/best.ckpt")


def test_load_ensemble_spec_errors(tmp_path):
    (tmp_path / "bad.json").write_text("[1, 2")
    with pytest.raises(ConfigurationError):
        load_ensemble_spec(tmp_path / "bad.json")
    (tmp_path / "invalid.json").write_text('{"members": []}')
    with pytest.raises(ConfigurationError):
        load_ensemble_spec(tmp_path / "invalid.json")


def test_single_member_majority_equals_binarized_forward(checkpoints, stack):
    spec = EnsembleSpec(members=[checkpoints[0]])
    expected = binarize(forward(build_network(NetworkConfig.tiny(), seed=0), stack), 0.5)
    assert np.array_equal(fuse_ensemble(spec, stack).values, expected.values)


def test_identical_members_equal_single_member(checkpoints, stack):
    spec = EnsembleSpec(members=[checkpoints[1]] * 3)
    single = binarize(forward(build_network(NetworkConfig.tiny(), seed=1), stack), 0.5)
    assert np.array_equal(fuse_ensemble(spec, stack).values, single.values)


def test_ensemble_resolves_relative_members(checkpoints, stack, tmp_path):
    spec = EnsembleSpec(members=[path.name for path in checkpoints])
    ensemble = Ensemble.from_spec(spec, base_dir=tmp_path)
    mask, probs = ensemble.predict(stack)
    assert len(probs) == 3
    assert mask.shape == (32, 32)
    assert mask.slice_index == 1
    assert np.array_equal(mask.values, majority_vote([binarize(p, 0.5) for p in probs]).values)


def test_ensemble_predict_many_matches_predict(checkpoints, stack):
    ensemble = Ensemble.from_spec(EnsembleSpec(members=checkpoints, strategy="mean_prob"))
    [(mask, _)] = ensemble.predict_many([stack])
    assert np.array_equal(mask.values, ensemble.predict(stack)[0].values)


def test_ensemble_strategy_override(checkpoints):
    ensemble = Ensemble.from_spec(EnsembleSpec(members=checkpoints), strategy="max_prob")
    assert type(ensemble.strategy) is strategies["max_prob"]


def test_missing_member_names_it(checkpoints, tmp_path):
    spec = EnsembleSpec(members=[checkpoints[0], tmp_path / "gone.ckpt", checkpoints[2]])
    with pytest.raises(DependencyError, match="gone.ckpt") as error:
        Ensemble.from_spec(spec)
    assert error.value.exit_code == 3


def test_corrupt_member_names_it(checkpoints, tmp_path):
    corrupt = tmp_path / "corrupt.ckpt"
    corrupt.write_bytes(CHECKPOINT_MAGIC + b"\x01\x00")
    spec = EnsembleSpec(members=[checkpoints[0], checkpoints[1], corrupt])
    with pytest.raises(DependencyError, match="corrupt.ckpt") as error:
        Ensemble.from_spec(spec)
    assert error.value.exit_code == 3
