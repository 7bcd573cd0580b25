"""Checkpoint directories: YAML descriptor, parameter archive, trainer state.

Layout of a checkpoint directory::

    descriptor.yaml     method, channel counts, config, config hash, epoch, step
    params.npz          state-dict arrays keyed "<network>/<name>"
    trainer_state.pt    optimizer state dicts, RNG states, best metric
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import torch
import yaml
from torch import nn

from uwtranslate.core.types import Method, TrainConfig
from uwtranslate.errors import CheckpointError
from uwtranslate.networks.factory import TRANSLATOR_NAME, build_networks

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DESCRIPTOR_FILE = "descriptor.yaml"
PARAMS_FILE = "params.npz"
STATE_FILE = "trainer_state.pt"

# Run-length and bookkeeping knobs; changing them does not invalidate a checkpoint.
RUNTIME_FIELDS = ("epochs", "max_steps", "checkpoint_every", "log_flush_interval", "deterministic")


def config_hash(config: TrainConfig | dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of the model-defining config fields."""
    data = config.to_dict() if isinstance(config, TrainConfig) else dict(config)
    for key in RUNTIME_FIELDS:
        data.pop(key, None)
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class TrainerState:
    """Everything needed to resume a run or to serve its translator."""

    config: TrainConfig
    networks: dict[str, nn.Module]
    optimizer_states: dict[str, dict[str, Any]] = field(default_factory=dict)
    epoch: int = 0
    global_step: int = 0
    rng_state: dict[str, Any] | None = None
    best_metric: float | None = None
    depth_range: tuple[float, float] | None = None


def capture_rng_state() -> dict[str, Any]:
    return {
        "torch": torch.get_rng_state(),
        "numpy": np.random.get_state(),
        "python": random.getstate(),
    }


def restore_rng_state(state: dict[str, Any]) -> None:
    torch.set_rng_state(state["torch"])
    np.random.set_state(state["numpy"])
    random.setstate(state["python"])


def _descriptor(state: TrainerState) -> dict[str, Any]:
    cfg = state.config
    return {
        "format_version": FORMAT_VERSION,
        "method": cfg.method.value,
        "in_channels": cfg.in_channels,
        "out_channels": 3,
        "n_res_blocks": cfg.n_res_blocks,
        "image_size": cfg.image_size,
        "depth_range": list(state.depth_range) if state.depth_range is not None else None,
        "networks": sorted(state.networks),
        "translator": TRANSLATOR_NAME[cfg.method],
        "config": cfg.to_dict(),
        "config_hash": config_hash(cfg),
        "epoch": state.epoch,
        "global_step": state.global_step,
    }


def save_checkpoint(state: TrainerState, path: Path) -> Path:
    """Write ``state`` into the directory ``path`` (created if needed)."""
    path.mkdir(parents=True, exist_ok=True)
    arrays = {
        f"{net_name}/{param_name}": tensor.detach().cpu().numpy()
        for net_name, net in state.networks.items()
        for param_name, tensor in net.state_dict().items()
    }
    np.savez(path / PARAMS_FILE, **arrays)
    torch.save(
        {
            "optimizers": state.optimizer_states,
            "rng": state.rng_state,
            "best_metric": state.best_metric,
        },
        path / STATE_FILE,
    )
    with open(path / DESCRIPTOR_FILE, "w", encoding="utf-8") as f:
        yaml.safe_dump(_descriptor(state), f, sort_keys=False)
    logger.info("Saved checkpoint epoch=%d step=%d to %s", state.epoch, state.global_step, path)
    return path


def read_descriptor(path: Path) -> dict[str, Any]:
    """Load and integrity-check a checkpoint descriptor.

    Raises:
        CheckpointError: If the descriptor is missing, malformed, or its config hash does
            not match the stored config.
    """
    descriptor_path = path / DESCRIPTOR_FILE
    if not descriptor_path.is_file():
        raise CheckpointError(f"not a checkpoint directory (no {DESCRIPTOR_FILE}): {path}")
    try:
        with open(descriptor_path, encoding="utf-8") as f:
            descriptor = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise CheckpointError(f"corrupt descriptor {descriptor_path}: {e}") from e
    if not isinstance(descriptor, dict):
        raise CheckpointError(f"corrupt descriptor {descriptor_path}: expected a mapping")
    for key in ("format_version", "method", "in_channels", "config", "config_hash"):
        if key not in descriptor:
            raise CheckpointError(f"descriptor {descriptor_path} is missing field '{key}'")
    if descriptor["format_version"] != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {descriptor['format_version']} in {path}")
    if config_hash(descriptor["config"]) != descriptor["config_hash"]:
        raise CheckpointError(f"config hash mismatch in {descriptor_path}: the stored config was modified")
    return descriptor


def _load_params(path: Path, networks: dict[str, nn.Module]) -> None:
    params_path = path / PARAMS_FILE
    if not params_path.is_file():
        raise CheckpointError(f"checkpoint has no parameter archive: {params_path}")
    try:
        archive = np.load(params_path, allow_pickle=False)
    except (OSError, ValueError) as e:
        raise CheckpointError(f"corrupt parameter archive {params_path}: {e}") from e
    with archive:
        for net_name, net in networks.items():
            state_dict = {}
            for param_name in net.state_dict():
                key = f"{net_name}/{param_name}"
                try:
                    state_dict[param_name] = torch.from_numpy(np.array(archive[key]))
                except KeyError as e:
                    raise CheckpointError(f"parameter archive {params_path} is missing entry '{key}'") from e
                except (OSError, ValueError) as e:
                    raise CheckpointError(f"corrupt entry '{key}' in {params_path}: {e}") from e
            try:
                net.load_state_dict(state_dict)
            except RuntimeError as e:
                raise CheckpointError(f"entry shapes for network '{net_name}' do not match: {e}") from e


def load_checkpoint(path: Path, expected: TrainConfig | None = None) -> TrainerState:
    """Rebuild the networks described by a checkpoint and load its parameters.

    Args:
        path: Checkpoint directory.
        expected: Config of the trainer that will consume the state; when given, the
            checkpoint must have the same channel layout, method, and config hash.

    Raises:
        CheckpointError: On a corrupt archive or an incompatible checkpoint.
    """
    descriptor = read_descriptor(path)
    try:
        config = TrainConfig.from_dict(descriptor["config"])
    except (TypeError, ValueError) as e:
        raise CheckpointError(f"checkpoint config in {path} is invalid: {e}") from e
    if expected is not None:
        check_compatible(config, expected, path)

    networks = build_networks(config)
    _load_params(path, networks)

    extra: dict[str, Any] = {}
    state_path = path / STATE_FILE
    if state_path.is_file():
        try:
            # numpy/python RNG states are not plain tensors
            extra = torch.load(state_path, map_location="cpu", weights_only=False)
        except Exception as e:
            raise CheckpointError(f"corrupt trainer state {state_path}: {e}") from e

    depth_range = descriptor.get("depth_range")
    return TrainerState(
        config=config,
        networks=networks,
        optimizer_states=extra.get("optimizers", {}),
        epoch=int(descriptor.get("epoch", 0)),
        global_step=int(descriptor.get("global_step", 0)),
        rng_state=extra.get("rng"),
        best_metric=extra.get("best_metric"),
        depth_range=tuple(depth_range) if depth_range is not None else None,
    )


def check_compatible(stored: TrainConfig, expected: TrainConfig, path: Path) -> None:
    if stored.in_channels != expected.in_channels:
        raise CheckpointError(
            f"channel mismatch: checkpoint {path} was trained on {stored.in_channels}-channel input "
            f"({stored.method.value}) but {expected.in_channels} channels are expected ({expected.method.value})"
        )
    if stored.method is not expected.method:
        raise CheckpointError(f"method mismatch: checkpoint is {stored.method.value}, expected {expected.method.value}")
    if config_hash(stored) != config_hash(expected):
        raise CheckpointError(f"config hash mismatch: checkpoint {path} was trained with a different configuration")


@dataclass
class LoadedTranslator:
    """The inference network of a checkpoint and what it consumes."""

    network: nn.Module
    method: Method
    in_channels: int
    image_size: int
    depth_range: tuple[float, float] | None
    path: Path

    def __call__(self, batch: torch.Tensor) -> torch.Tensor:
        if batch.shape[1] != self.in_channels:
            raise CheckpointError(
                f"checkpoint {self.path} ({self.method.value}) consumes {self.in_channels}-channel input, "
                f"got {batch.shape[1]}"
            )
        with torch.no_grad():
            return self.network(batch)


def load_translator(path: Path) -> LoadedTranslator:
    """Load only the translating network of a checkpoint, in eval mode."""
    state = load_checkpoint(path)
    network = state.networks[TRANSLATOR_NAME[state.config.method]]
    network.eval()
    return LoadedTranslator(
        network=network,
        method=state.config.method,
        in_channels=state.config.in_channels,
        image_size=state.config.image_size,
        depth_range=state.depth_range,
        path=path,
    )
