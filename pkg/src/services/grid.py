import json
import logging
from pathlib import Path
from typing import List, Mapping, Optional, Sequence

import pandas as pd

from src.const import ENSEMBLE_SIZE
from src.errors import ConfigurationError
from src.network import build_network
from src.services.trainer import fit
from src.types.exam import DatasetSplit, Exam
from src.types.network import NetworkConfig
from src.types.train import GridEntry, GridResult, TrainConfig

logger = logging.getLogger(__name__)

DEFAULT_GRID_SOURCE = "default stand-in grid (learning rates 1e-4, 2e-4, 5e-4 × seeds 0, 1)"
GRID_COLUMNS = ["run_id", "learning_rate", "batch_size", "seed", "best_val_dice", "checkpoint_path"]


def default_grid(epochs: int = 100, batch_size: int = 12) -> List[TrainConfig]:
    return [
        TrainConfig(learning_rate=learning_rate, batch_size=batch_size, epochs=epochs, seed=seed)
        for learning_rate in (1e-4, 2e-4, 5e-4)
        for seed in (0, 1)
    ]


def run_grid(
    grid: Sequence[TrainConfig],
    split: DatasetSplit,
    exams: Mapping[str, Exam],
    out_dir: Path,
    network_config: Optional[NetworkConfig] = None,
    pretrained_path: Optional[Path] = None,
    source: str = "run config",
) -> GridResult:
    """
    Fit one model per configuration and rank the runs by best validation Dice.

    Each run lives in `out_dir/run_NN/`; checkpoint paths in the result are relative to `out_dir`.
    The top three runs are the ensemble members.

    Raises:
        ConfigurationError: If the grid has fewer than three configurations.
    """
    if len(grid) < ENSEMBLE_SIZE:
        raise ConfigurationError(f"A grid needs at least {ENSEMBLE_SIZE} configurations, got {len(grid)}")
    network_config = network_config or NetworkConfig()
    out_dir = Path(out_dir)

    entries = []
    for i, config in enumerate(grid):
        run_id = f"run_{i:02d}"
        logger.info(f"Grid {run_id}: lr {config.learning_rate}, batch {config.batch_size}, seed {config.seed}")
        model = build_network(network_config, seed=config.seed, pretrained_path=pretrained_path)
        trained, _ = fit(model, split, exams, config, out_dir=out_dir / run_id)
        entries.append(
            GridEntry(
                run_id=run_id,
                config=config,
                checkpoint_path=Path(run_id) / "best.ckpt",
                best_val_dice=trained.best_val_dice,
            )
        )
        logger.info(f"Grid {run_id} finished: best val Dice {trained.best_val_dice:.4f} at epoch {trained.best_epoch}")

    entries.sort(key=lambda entry: entry.best_val_dice, reverse=True)
    result = GridResult(entries=entries, source=source)
    write_grid(result, out_dir)
    return result


def write_grid(result: GridResult, out_dir: Path) -> None:
    rows = [
        {
            "run_id": entry.run_id,
            "learning_rate": entry.config.learning_rate,
            "batch_size": entry.config.batch_size,
            "seed": entry.config.seed,
            "best_val_dice": entry.best_val_dice,
            "checkpoint_path": entry.checkpoint_path.as_posix(),
        }
        for entry in result.entries
    ]
    pd.DataFrame(rows, columns=GRID_COLUMNS).to_csv(Path(out_dir) / "grid.csv", index=False)
    summary = {
        "source": result.source,
        "runs": len(result.entries),
        "ensemble_members": [entry.run_id for entry in result.ensemble_members(ENSEMBLE_SIZE)],
    }
    (Path(out_dir) / "grid.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
