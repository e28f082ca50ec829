import numpy as np
import pandas as pd
import pytest
import torch

from src.errors import ConfigurationError, NumericalDivergenceError, ShapeError
from src.network import build_network, load_checkpoint
from src.services.stacking import build_training_pairs, split_dataset
from src.services.trainer import create_optimizer, fit, soft_dice_loss, train_step, validation_dice
from src.types.exam import DatasetSplit, InputStack
from src.types.network import NetworkConfig
from src.types.train import TrainConfig
from tests.conftest import make_phantoms


def same_parameters(a, b) -> bool:
    return all(torch.equal(a.parameters[name], b.parameters[name]) for name in a.parameters)


@pytest.fixture
def exams():
    return {exam.id: exam for exam in make_phantoms(5)}


@pytest.fixture
def pairs(exams):
    return build_training_pairs([("exam_00", 0), ("exam_00", 1)], exams)


def test_dice_loss_perfect_prediction_is_zero():
    target = torch.zeros(2, 32, 32)
    target[:, 5:20, 5:20] = 1
    assert soft_dice_loss(target.clone(), target).item() == 0.0


def test_dice_loss_empty_prediction():
    target = torch.zeros(1, 32, 32)
    target[0, :10, :10] = 1
    assert soft_dice_loss(torch.zeros(1, 32, 32), target, epsilon=1.0).item() == pytest.approx(1 - 1 / 101)


def test_dice_loss_empty_prediction_of_empty_target():
    assert soft_dice_loss(torch.zeros(1, 32, 32), torch.zeros(1, 32, 32), epsilon=1.0).item() == 0.0


def test_dice_loss_per_sample_pooling():
    prob = torch.zeros(2, 32, 32)
    target = torch.zeros(2, 32, 32)
    target[0, :10, :10] = 1
    prob[1, :10, :10] = 1
    target[1, :10, :10] = 1
    assert soft_dice_loss(prob, target, pooling="per_sample").item() == pytest.approx((1 - 1 / 101) / 2)
    assert soft_dice_loss(prob, target, pooling="batch").item() == pytest.approx(1 - 201 / 301)


def test_dice_loss_shape_mismatch():
    with pytest.raises(ShapeError):
        soft_dice_loss(torch.zeros(1, 32, 32), torch.zeros(1, 32, 31))


@pytest.mark.parametrize("pooling", ["batch", "per_sample"])
@pytest.mark.parametrize("seed", range(5))
def test_dice_loss_gradient_matches_finite_differences(seed, pooling):
    generator = torch.Generator().manual_seed(seed)
    prob = torch.rand(2, 8, 8, dtype=torch.float64, generator=generator).requires_grad_()
    target = (torch.rand(2, 8, 8, dtype=torch.float64, generator=generator) > 0.5).double()
    (analytic,) = torch.autograd.grad(soft_dice_loss(prob, target, 1.0, pooling), prob)

    step = 1e-6
    numeric = torch.zeros_like(analytic)
    flat = prob.detach().clone().view(-1)
    for index in range(flat.numel()):
        original = flat[index].item()
        flat[index] = original + step
        plus = soft_dice_loss(flat.view_as(prob), target, 1.0, pooling).item()
        flat[index] = original - step
        minus = soft_dice_loss(flat.view_as(prob), target, 1.0, pooling).item()
        flat[index] = original
        numeric.view(-1)[index] = (plus - minus) / (2 * step)

    relative_error = ((analytic - numeric).norm() / numeric.norm()).item()
    assert relative_error < 1e-6


def test_train_step_counts_steps(pairs):
    model = build_network(NetworkConfig.tiny(), seed=0)
    config = TrainConfig(batch_size=2)
    optimizer = create_optimizer(model, config)
    _, optimizer, loss = train_step(model, optimizer, pairs, config)
    assert optimizer.step == 1
    assert 0.0 <= loss < 1.0


def test_train_step_is_deterministic(pairs):
    results = []
    for _ in range(2):
        model = build_network(NetworkConfig.tiny(), seed=1)
        config = TrainConfig(learning_rate=1e-3)
        optimizer = create_optimizer(model, config)
        for _ in range(3):
            train_step(model, optimizer, pairs, config)
        results.append(model)
    assert same_parameters(results[0], results[1])


def test_train_step_zero_learning_rate_keeps_parameters(pairs):
    model = build_network(NetworkConfig.tiny(), seed=0)
    initial = build_network(NetworkConfig.tiny(), seed=0)
    config = TrainConfig(learning_rate=0.0)
    optimizer = create_optimizer(model, config)
    _, _, loss = train_step(model, optimizer, pairs, config)
    assert np.isfinite(loss)
    assert same_parameters(model, initial)


def test_train_step_reduces_loss_on_a_fixed_batch(pairs):
    model = build_network(NetworkConfig.tiny(), seed=0)
    config = TrainConfig(learning_rate=1e-3)
    optimizer = create_optimizer(model, config)
    losses = [train_step(model, optimizer, pairs, config)[2] for _ in range(30)]
    assert losses[-1] < losses[0]


def test_train_step_with_auxiliary_heads(pairs):
    model = build_network(NetworkConfig.tiny(auxiliary_heads=True), seed=0)
    config = TrainConfig(auxiliary_loss_weight=0.5)
    optimizer = create_optimizer(model, config)
    _, _, loss = train_step(model, optimizer, pairs, config)
    assert 0.0 <= loss < 1.5
    assert model.network.aux_heads[0].weight.grad is not None


def test_train_step_non_finite_input_diverges(pairs):
    model = build_network(NetworkConfig.tiny(), seed=0)
    config = TrainConfig()
    optimizer = create_optimizer(model, config)
    stack, mask = pairs[0]
    broken = InputStack(channels=np.full_like(stack.channels, np.nan), center_index=0, exam_id="nan")
    with pytest.raises(NumericalDivergenceError) as error:
        train_step(model, optimizer, [(broken, mask)], config, epoch=4)
    assert error.value.epoch == 4
    assert error.value.step == 1


def test_train_step_empty_batch():
    model = build_network(NetworkConfig.tiny(), seed=0)
    config = TrainConfig()
    with pytest.raises(ConfigurationError):
        train_step(model, create_optimizer(model, config), [], config)


def test_validation_dice_is_a_fraction(pairs):
    score = validation_dice(build_network(NetworkConfig.tiny(), seed=0), pairs)
    assert 0.0 <= score <= 1.0


def test_fit_zero_epochs_returns_initialization(exams, tmp_path):
    split = split_dataset(list(exams.values()), (0.6, 0.2), seed=0)
    model = build_network(NetworkConfig.tiny(), seed=0)
    initial = build_network(NetworkConfig.tiny(), seed=0)
    trained, history = fit(model, split, exams, TrainConfig(epochs=0), out_dir=tmp_path)
    assert history.records == []
    assert trained.best_epoch == 0
    assert same_parameters(trained.best, initial)
    assert same_parameters(load_checkpoint(tmp_path / "best.ckpt"), initial)


def test_fit_writes_run_directory(exams, tmp_path):
    split = split_dataset(list(exams.values()), (0.6, 0.2), seed=0)
    model = build_network(NetworkConfig.tiny(), seed=0)
    trained, history = fit(model, split, exams, TrainConfig(epochs=2, batch_size=4), out_dir=tmp_path / "run")
    assert [record.epoch for record in history.records] == [1, 2]
    assert trained.run_dir == tmp_path / "run"
    for name in ("config.json", "history.csv", "best.ckpt", "final.ckpt"):
        assert (tmp_path / "run" / name).is_file()
    frame = pd.read_csv(tmp_path / "run" / "history.csv")
    assert list(frame.columns) == ["epoch", "train_loss", "val_dice", "seconds"]
    assert trained.best_val_dice == max([trained.best_val_dice] + [r.val_dice for r in history.records])
    assert TrainConfig.model_validate_json((tmp_path / "run" / "config.json").read_text()).epochs == 2


def test_fit_is_deterministic(exams):
    split = split_dataset(list(exams.values()), (0.6, 0.2), seed=1)
    runs = []
    for _ in range(2):
        model = build_network(NetworkConfig.tiny(), seed=2)
        runs.append(fit(model, split, exams, TrainConfig(epochs=2, batch_size=3, learning_rate=1e-3)))
    (first, first_history), (second, second_history) = runs
    assert np.allclose(first_history.train_losses, second_history.train_losses, atol=1e-6)
    assert [r.val_dice for r in first_history.records] == pytest.approx([r.val_dice for r in second_history.records])
    assert same_parameters(first.final, second.final)


def test_fit_requires_validation_partition(exams):
    split = DatasetSplit(train=[("exam_00", 0)], validation=[], test=[("exam_01", 0)], seed=0)
    with pytest.raises(ConfigurationError):
        fit(build_network(NetworkConfig.tiny(), seed=0), split, exams, TrainConfig(epochs=1))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(dice_pooling="sum")
