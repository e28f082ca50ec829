import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from pydantic import ValidationError

from src.errors import ConfigurationError, DependencyError
from src.fusion_strategies import get_fusion_strategy
from src.network import forward, load_checkpoint, predict_probabilities
from src.types.exam import InputStack, Mask, ProbabilityMap
from src.types.fusion_strategy import BaseFusionStrategy, EnsembleSpec
from src.types.network import ModelParams

logger = logging.getLogger(__name__)


def load_ensemble_spec(path: Path) -> EnsembleSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"Cannot read ensemble spec {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Ensemble spec {path} is not valid JSON: {e.msg}") from e
    try:
        return EnsembleSpec.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"Ensemble spec {path} is invalid: {e}") from e


def save_ensemble_spec(spec: EnsembleSpec, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(spec.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
    return path


class Ensemble:
    """
    Loaded ensemble members plus the fusion strategy that combines them.
    """

    def __init__(self, members: Sequence[ModelParams], strategy: BaseFusionStrategy, names: Sequence[str] = ()):
        if not members:
            raise ConfigurationError("An ensemble needs at least one member")
        self.members = list(members)
        self.strategy = strategy
        self.names = list(names) or [f"member_{i}" for i in range(len(self.members))]

    @classmethod
    def from_spec(
        cls, spec: EnsembleSpec, base_dir: Optional[Path] = None, strategy: Optional[str] = None
    ) -> "Ensemble":
        """
        Load every member checkpoint named by `spec`.

        Args:
            spec (EnsembleSpec): The ensemble description.
            base_dir (Optional[Path]): Directory that relative member paths resolve against.
            strategy (Optional[str]): Overrides the spec's strategy.

        Raises:
            DependencyError: If a member checkpoint cannot be loaded; names the member.
        """
        strategy_name = strategy or spec.strategy
        fusion = get_fusion_strategy(strategy_name, spec.threshold)
        if fusion is None:
            raise ConfigurationError(f"Unknown fusion strategy: {strategy_name}")

        members = []
        for member in spec.members:
            path = member if member.is_absolute() or base_dir is None else Path(base_dir) / member
            try:
                members.append(load_checkpoint(path))
            except (OSError, ValueError) as e:
                raise DependencyError(str(member), str(e)) from e
            logger.info(f"Loaded ensemble member {member}")
        return cls(members, fusion, names=[str(member) for member in spec.members])

    def predict(self, stack: InputStack) -> Tuple[Mask, List[ProbabilityMap]]:
        probs = [forward(member, stack) for member in self.members]
        return self.strategy.fuse(probs), probs

    def predict_many(self, stacks: Sequence[InputStack]) -> List[Tuple[Mask, List[ProbabilityMap]]]:
        per_member = [predict_probabilities(member, stacks) for member in self.members]
        results = []
        for position in range(len(stacks)):
            probs = [maps[position] for maps in per_member]
            results.append((self.strategy.fuse(probs), probs))
        return results


def fuse_ensemble(spec: EnsembleSpec, stack: InputStack, base_dir: Optional[Path] = None) -> Mask:
    """Load the members of `spec`, evaluate them on `stack` and fuse their outputs."""
    mask, _ = Ensemble.from_spec(spec, base_dir=base_dir).predict(stack)
    return mask
