from pathlib import Path
from typing import List, Literal, Optional

import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.const import ENSEMBLE_SIZE
from src.types.network import ModelParams


class TrainConfig(BaseModel):
    """
    Optimizer and loop settings for one training run.

    Attributes:
        learning_rate (float): Adam step size; 0 freezes the parameters.
        batch_size (int): Stacks per Adam step.
        epochs (int): Passes over the training partition.
        seed (int): Network initialization and shuffling seed.
        smoothing_epsilon (float): Soft-Dice smoothing term.
        adam_beta1 (float): First-moment decay.
        adam_beta2 (float): Second-moment decay.
        adam_eps (float): Adam denominator guard.
        dice_pooling (str): "batch" pools the Dice ratio over the whole batch; "per_sample" averages per-stack losses.
        auxiliary_loss_weight (float): Weight of the per-tap auxiliary Dice losses when the network has auxiliary heads.
    """

    model_config = ConfigDict(frozen=True)

    learning_rate: float = Field(default=0.0002, ge=0.0)
    batch_size: int = Field(default=12, ge=1)
    epochs: int = Field(default=100, ge=0)
    seed: int = 0
    smoothing_epsilon: float = Field(default=1.0, gt=0.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    dice_pooling: Literal["batch", "per_sample"] = "batch"
    auxiliary_loss_weight: float = Field(default=0.0, ge=0.0)


class OptimizerState(BaseModel):
    """
    Adam moment accumulators (held by the torch optimizer) and the number of completed steps.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    adam: torch.optim.Adam
    step: int = Field(default=0, ge=0)


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_dice: float
    seconds: float


class TrainHistory(BaseModel):
    records: List[EpochRecord] = []

    @property
    def train_losses(self) -> List[float]:
        return [record.train_loss for record in self.records]


class TrainedModel(BaseModel):
    """
    Outcome of one fit.

    Attributes:
        best (ModelParams): Parameters at the epoch with the highest validation Dice (epoch 0 is the initialization).
        final (ModelParams): Parameters after the last epoch.
        best_epoch (int): Epoch the best parameters come from.
        best_val_dice (float): Validation Dice of the best parameters.
        run_dir (Optional[Path]): Directory holding config.json, history.csv, best.ckpt and final.ckpt, if written.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    best: ModelParams
    final: ModelParams
    best_epoch: int
    best_val_dice: float
    run_dir: Optional[Path] = None


class GridEntry(BaseModel):
    run_id: str
    config: TrainConfig
    checkpoint_path: Path
    best_val_dice: float = Field(ge=0.0, le=1.0)


class GridResult(BaseModel):
    """
    Grid runs sorted by best validation Dice, highest first.

    Attributes:
        entries (List[GridEntry]): One entry per run.
        source (str): Where the grid came from ("run config" or the default stand-in).
    """

    entries: List[GridEntry]
    source: str = "run config"

    @model_validator(mode="after")
    def validate_order(self) -> "GridResult":
        scores = [entry.best_val_dice for entry in self.entries]
        if scores != sorted(scores, reverse=True):
            raise ValueError("Grid entries must be sorted by best_val_dice, descending")
        return self

    def ensemble_members(self, count: int = ENSEMBLE_SIZE) -> List[GridEntry]:
        return self.entries[:count]
