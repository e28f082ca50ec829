from typing import Optional

from src.const import DEFAULT_THRESHOLD
from src.fusion_strategies.majority import MajorityFusionStrategy
from src.fusion_strategies.max_prob import MaxProbFusionStrategy
from src.fusion_strategies.mean_prob import MeanProbFusionStrategy
from src.types.fusion_strategy import BaseFusionStrategy

strategies = {
    "majority": MajorityFusionStrategy,
    "mean_prob": MeanProbFusionStrategy,
    "max_prob": MaxProbFusionStrategy,
}


def get_fusion_strategy(name: str, threshold: float = DEFAULT_THRESHOLD) -> Optional[BaseFusionStrategy]:
    strategy_class = strategies.get(name)
    return strategy_class(threshold) if strategy_class else None
