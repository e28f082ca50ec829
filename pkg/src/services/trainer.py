import copy
import logging
import time
from pathlib import Path
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from src.const import DEFAULT_THRESHOLD
from src.errors import ConfigurationError, NumericalDivergenceError, ShapeError
from src.network import predict_probabilities, save_checkpoint
from src.services.metrics import dice
from src.services.stacking import build_training_pairs
from src.services.voting import binarize
from src.types.exam import DatasetSplit, Exam, InputStack, Mask
from src.types.network import ModelParams
from src.types.train import EpochRecord, OptimizerState, TrainConfig, TrainedModel, TrainHistory
from src.util import pad_to_multiple

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["epoch", "train_loss", "val_dice", "seconds"]

TrainingPair = Tuple[InputStack, Mask]


def soft_dice_loss(
    prob: torch.Tensor,
    target: torch.Tensor,
    epsilon: float = 1.0,
    pooling: str = "batch",
) -> torch.Tensor:
    """
    Soft Dice loss 1 − (2·Σp·t + ε) / (Σp + Σt + ε).

    Args:
        prob (torch.Tensor): Probabilities, batch first.
        target (torch.Tensor): Binary targets of the same shape.
        epsilon (float): Smoothing term; an empty prediction of an empty target scores 0.
        pooling (str): "batch" computes one ratio over the whole batch; "per_sample" averages per-sample losses.

    Returns:
        torch.Tensor: Scalar loss in [0, 1).
    """
    if prob.shape != target.shape:
        raise ShapeError(f"Prediction shape {tuple(prob.shape)} differs from target shape {tuple(target.shape)}")
    target = target.to(prob.dtype)
    if pooling == "per_sample":
        dims = tuple(range(1, prob.dim()))
        intersection = (prob * target).sum(dim=dims)
        denominator = prob.sum(dim=dims) + target.sum(dim=dims)
        return (1.0 - (2.0 * intersection + epsilon) / (denominator + epsilon)).mean()
    intersection = (prob * target).sum()
    return 1.0 - (2.0 * intersection + epsilon) / (prob.sum() + target.sum() + epsilon)


def create_optimizer(model: ModelParams, config: TrainConfig) -> OptimizerState:
    adam = torch.optim.Adam(
        model.network.parameters(),
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
        eps=config.adam_eps,
    )
    return OptimizerState(adam=adam, step=0)


def _collate(batch: Sequence[TrainingPair], dtype: torch.dtype) -> Tuple[torch.Tensor, torch.Tensor]:
    inputs = np.stack([pad_to_multiple(stack.channels) for stack, _ in batch])
    targets = np.stack([pad_to_multiple(mask.values) for _, mask in batch])
    return torch.as_tensor(inputs, dtype=dtype), torch.as_tensor(targets, dtype=dtype)


def train_step(
    model: ModelParams,
    optimizer: OptimizerState,
    batch: Sequence[TrainingPair],
    config: TrainConfig,
    epoch: Optional[int] = None,
) -> Tuple[ModelParams, OptimizerState, float]:
    """
    One forward/backward pass on the soft Dice loss followed by one Adam update.

    Args:
        model (ModelParams): Updated in place.
        optimizer (OptimizerState): Updated in place; its step counter grows by one.
        batch (Sequence[TrainingPair]): Non-empty list of (InputStack, Mask).
        config (TrainConfig): Loss settings.
        epoch (Optional[int]): Reported in divergence errors.

    Returns:
        Tuple[ModelParams, OptimizerState, float]: The model, the optimizer and the loss before the update.

    Raises:
        NumericalDivergenceError: If the loss or any gradient is not finite.
    """
    if not batch:
        raise ConfigurationError("train_step needs a non-empty batch")
    network = model.network
    dtype = next(network.parameters()).dtype
    inputs, targets = _collate(batch, dtype)

    network.train()
    optimizer.adam.zero_grad(set_to_none=True)
    logits, aux_logits = network.forward_with_aux(inputs)
    loss = soft_dice_loss(torch.sigmoid(logits[:, 0]), targets, config.smoothing_epsilon, config.dice_pooling)
    if aux_logits and config.auxiliary_loss_weight > 0:
        aux_losses = [
            soft_dice_loss(torch.sigmoid(aux[:, 0]), targets, config.smoothing_epsilon, config.dice_pooling)
            for aux in aux_logits
        ]
        loss = loss + config.auxiliary_loss_weight * torch.stack(aux_losses).mean()

    step = optimizer.step + 1
    if not torch.isfinite(loss):
        raise NumericalDivergenceError(f"Loss became {loss.item()}", epoch=epoch, step=step)
    loss.backward()
    for name, parameter in network.named_parameters():
        if parameter.grad is not None and not torch.isfinite(parameter.grad).all():
            raise NumericalDivergenceError(f"Non-finite gradient for {name}", epoch=epoch, step=step)
    optimizer.adam.step()
    optimizer.step = step
    return model, optimizer, float(loss.item())


def validation_dice(model: ModelParams, pairs: Sequence[TrainingPair], threshold: float = DEFAULT_THRESHOLD) -> float:
    """Mean per-slice Dice of the thresholded predictions."""
    if not pairs:
        return 0.0
    maps = predict_probabilities(model, [stack for stack, _ in pairs])
    scores = [dice(binarize(prob, threshold), mask) for prob, (_, mask) in zip(maps, pairs)]
    return float(np.mean(scores))


def _snapshot(model: ModelParams) -> ModelParams:
    return ModelParams(config=model.config, network=copy.deepcopy(model.network), seed=model.seed)


def write_history(history: TrainHistory, path: Path) -> None:
    frame = pd.DataFrame([record.model_dump() for record in history.records], columns=HISTORY_COLUMNS)
    frame.to_csv(path, index=False)


def fit(
    model: ModelParams,
    split: DatasetSplit,
    exams: Mapping[str, Exam],
    config: TrainConfig,
    out_dir: Optional[Path] = None,
) -> Tuple[TrainedModel, TrainHistory]:
    """
    Train `model` on the split's train partition, selecting the epoch with the best validation Dice.

    Epoch 0 (the initialization) is the starting best; an epoch replaces it only with a strictly
    higher validation Dice.

    Args:
        model (ModelParams): Trained in place; `TrainedModel.final` is this object.
        split (DatasetSplit): Needs non-empty train and validation partitions.
        exams (Mapping[str, Exam]): Raw exams with masks, by id.
        config (TrainConfig): Optimizer and loop settings.
        out_dir (Optional[Path]): If given, receives config.json, history.csv, best.ckpt and final.ckpt.

    Returns:
        Tuple[TrainedModel, TrainHistory]: The selected models and one record per epoch.
    """
    if not split.train or not split.validation:
        raise ConfigurationError("Training needs non-empty train and validation partitions")
    train_pairs = build_training_pairs(split.train, exams)
    validation_pairs = build_training_pairs(split.validation, exams)

    optimizer = create_optimizer(model, config)
    rng = np.random.default_rng(config.seed)
    history = TrainHistory()

    best = _snapshot(model)
    best_epoch = 0
    best_dice = validation_dice(model, validation_pairs)

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        order = rng.permutation(len(train_pairs))
        losses: List[float] = []
        for start in range(0, len(order), config.batch_size):
            batch = [train_pairs[i] for i in order[start : start + config.batch_size]]
            _, _, loss = train_step(model, optimizer, batch, config, epoch=epoch)
            losses.append(loss)

        val_dice = validation_dice(model, validation_pairs)
        record = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            val_dice=val_dice,
            seconds=time.perf_counter() - started,
        )
        history.records.append(record)
        logger.info(
            f"Epoch {epoch}/{config.epochs}: loss {record.train_loss:.5f}, "
            f"val Dice {val_dice:.4f} ({record.seconds:.1f}s)"
        )
        if val_dice > best_dice:
            best, best_epoch, best_dice = _snapshot(model), epoch, val_dice

    run_dir = None
    if out_dir is not None:
        run_dir = Path(out_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "config.json").write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")
        write_history(history, run_dir / "history.csv")
        save_checkpoint(best, run_dir / "best.ckpt")
        save_checkpoint(model, run_dir / "final.ckpt")

    trained = TrainedModel(best=best, final=model, best_epoch=best_epoch, best_val_dice=best_dice, run_dir=run_dir)
    return trained, history
