from src.network.checkpoint import load_checkpoint, load_pretrained_encoder, save_checkpoint
from src.network.rse_net import (
    RSENet,
    build_network,
    forward,
    predict_probabilities,
    se_block_forward,
    tap_forward,
    upsample_to_input,
)

__all__ = [
    "RSENet",
    "build_network",
    "forward",
    "predict_probabilities",
    "se_block_forward",
    "tap_forward",
    "upsample_to_input",
    "save_checkpoint",
    "load_checkpoint",
    "load_pretrained_encoder",
]
