import json
import logging
import struct
from pathlib import Path

import numpy as np
import torch

from src.const import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from src.errors import ConfigurationError
from src.network.rse_net import RSENet
from src.types.network import ModelParams, NetworkConfig

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<II")
_HEADER_KEYS = ("config", "seed", "tensors")


def save_checkpoint(model: ModelParams, path: Path) -> Path:
    """
    Write a checkpoint: magic, uint32 version, uint32 header length, a UTF-8 JSON header
    (config, seed, tensor table) and the tensors as little-endian float32 payloads.

    Args:
        model (ModelParams): The model to persist.
        path (Path): Destination file.

    Returns:
        Path: The file written.
    """
    tensors = []
    payloads = []
    offset = 0
    for name, tensor in model.network.state_dict().items():
        payload = np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype="<f4").tobytes()
        tensors.append({"name": name, "shape": list(tensor.shape), "offset": offset})
        payloads.append(payload)
        offset += len(payload)

    header = json.dumps(
        {"config": model.config.model_dump(mode="json"), "seed": model.seed, "tensors": tensors},
        sort_keys=True,
    ).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(_HEADER.pack(CHECKPOINT_VERSION, len(header)))
        f.write(header)
        for payload in payloads:
            f.write(payload)
    return path


def load_checkpoint(path: Path) -> ModelParams:
    """
    Read a checkpoint written by `save_checkpoint`.

    Raises:
        OSError: If the file cannot be read.
        ConfigurationError: If the file is not a supported, intact checkpoint.
    """
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ConfigurationError(f"{path} is not an RSE-Net checkpoint")
    start = len(CHECKPOINT_MAGIC)
    if len(data) < start + _HEADER.size:
        raise ConfigurationError(f"{path}: truncated checkpoint header")
    version, header_length = _HEADER.unpack_from(data, start)
    if version != CHECKPOINT_VERSION:
        raise ConfigurationError(f"{path}: unsupported checkpoint version {version}")
    start += _HEADER.size
    if len(data) < start + header_length:
        raise ConfigurationError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(data[start : start + header_length].decode("utf-8"))
    except ValueError as e:
        raise ConfigurationError(f"{path}: unreadable checkpoint header ({e})") from e
    missing = [key for key in _HEADER_KEYS if not isinstance(header, dict) or key not in header]
    if missing:
        raise ConfigurationError(f"{path}: checkpoint header lacks {missing}")
    payload_start = start + header_length

    config = NetworkConfig.model_validate(header["config"])
    network = RSENet(config)
    state = {}
    try:
        for entry in header["tensors"]:
            count = int(np.prod(entry["shape"], dtype=np.int64))
            array = np.frombuffer(data, dtype="<f4", count=count, offset=payload_start + int(entry["offset"]))
            state[entry["name"]] = torch.from_numpy(array.astype(np.float32).reshape(entry["shape"]))
        network.load_state_dict(state)
        seed = int(header["seed"])
    except (KeyError, TypeError, ValueError, RuntimeError) as e:
        raise ConfigurationError(f"{path}: tensors do not match the stored configuration ({e})") from e
    return ModelParams(config=config, network=network, seed=seed)


def load_pretrained_encoder(model: ModelParams, path: Path) -> int:
    """
    Copy encoder weights from a torch state dict into `model`.

    Only stem and stage tensors whose name and shape both match are copied; everything else is skipped.

    Returns:
        int: Number of tensors copied.
    """
    source = torch.load(Path(path), map_location="cpu", weights_only=True)
    if isinstance(source, dict) and "state_dict" in source:
        source = source["state_dict"]
    target = model.network.state_dict()
    copied = {}
    skipped = []
    for name, tensor in source.items():
        if not name.startswith(("stem.", "stages.")):
            continue
        if name in target and target[name].shape == tensor.shape:
            copied[name] = tensor.to(target[name].dtype)
        else:
            skipped.append(name)
    model.network.load_state_dict(copied, strict=False)
    if skipped:
        logger.warning(f"Skipped {len(skipped)} pretrained tensors with no matching encoder slot: {skipped[:5]}")
    logger.info(f"Copied {len(copied)} pretrained encoder tensors from {path}")
    return len(copied)
