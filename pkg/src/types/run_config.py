from pathlib import Path
from typing import List, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.const import DEFAULT_THRESHOLD, ENSEMBLE_SIZE
from src.errors import UsageError
from src.types.fusion_strategy import FusionStrategyName
from src.types.network import NetworkConfig
from src.types.train import TrainConfig


class SplitSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fractions: Tuple[float, float] = (0.6, 0.2)
    seed: Optional[int] = None


class EnsembleSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    strategy: FusionStrategyName = "majority"
    threshold: float = Field(default=DEFAULT_THRESHOLD, gt=0.0, lt=1.0)


class RunConfig(BaseModel):
    """
    Everything `train` needs besides the data.

    Attributes:
        network (NetworkConfig): Architecture shared by every grid run.
        grid (Optional[List[TrainConfig]]): Training configurations; the default stand-in grid when omitted.
        epochs (int): Epochs per run of the default grid.
        split (SplitSettings): Exam-level split fractions and seed.
        ensemble (EnsembleSettings): Fusion settings written to ensemble.json.
        data_dir (Optional[Path]): Exam store; the --data flag takes precedence.
        output_dir (Optional[Path]): Run directory; the --out flag takes precedence.
    """

    model_config = ConfigDict(extra="forbid")

    network: NetworkConfig = NetworkConfig()
    grid: Optional[List[TrainConfig]] = None
    epochs: int = Field(default=100, ge=0)
    split: SplitSettings = SplitSettings()
    ensemble: EnsembleSettings = EnsembleSettings()
    data_dir: Optional[Path] = None
    output_dir: Optional[Path] = None

    @model_validator(mode="after")
    def validate_grid(self) -> "RunConfig":
        if self.grid is not None and len(self.grid) < ENSEMBLE_SIZE:
            raise ValueError(f"grid has {len(self.grid)} runs but the ensemble needs {ENSEMBLE_SIZE}")
        self.network.check_stages()
        return self


def load_run_config(path: Path) -> RunConfig:
    """Parse a run config written as JSON (or YAML, which safe_load also accepts)."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise UsageError(f"Cannot read run config {path}: {e.strerror}") from e
    except yaml.YAMLError as e:
        raise UsageError(f"Run config {path} is not valid JSON/YAML: {e}") from e
    return RunConfig.model_validate(raw or {})
