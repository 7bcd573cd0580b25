"""Shared fixtures: tiny VAROS-style datasets written with Pillow into tmp_path."""

from collections.abc import Iterator
from pathlib import Path

import numpy as np
import pytest
import torch
import yaml
from PIL import Image

from uwtranslate.core.types import ContrastiveConfig, GanMode, Method, TrainConfig
from uwtranslate.data.manifest import DatasetManifest

FIXTURE_SIZE = 32


def write_rgb(path: Path, array: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(array.astype(np.uint8)).save(path)
    return path


def write_depth(path: Path, array: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(array.astype(np.uint16)).save(path)
    return path


def make_scene(rng: np.random.Generator, size: int = FIXTURE_SIZE) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """A smooth uniform-lighting render, its blue-green underwater version, and a depth ramp."""
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    base = rng.uniform(0.2, 0.9, size=3)
    phase = rng.uniform(0, np.pi)
    texture = 0.5 + 0.5 * np.sin(4 * np.pi * xx + phase) * np.cos(3 * np.pi * yy)
    uniform = np.clip(255 * base * (0.4 + 0.6 * texture[..., None]), 0, 255)
    depth = (1000 + 30000 * yy + 5000 * rng.uniform()).astype(np.uint16)
    attenuation = np.exp(-np.array([2.5, 0.8, 0.5]) * (depth[..., None] / 65535.0) * 3)
    backscatter = np.array([10, 60, 80]) * (1 - attenuation)
    underwater = np.clip(uniform * attenuation + backscatter, 0, 255)
    return uniform.astype(np.uint8), underwater.astype(np.uint8), depth


def build_varos(root: Path, scene_ids: range, size: int = FIXTURE_SIZE, seed: int = 0) -> Path:
    """Write ``root/{A,B,depth}/<id>.png`` for every scene id."""
    rng = np.random.default_rng(seed)
    for scene in scene_ids:
        uniform, underwater, depth = make_scene(rng, size)
        name = f"{scene:05d}.png"
        write_rgb(root / "B" / name, uniform)
        write_rgb(root / "A" / name, underwater)
        write_depth(root / "depth" / name, depth)
    return root


def write_manifest(path: Path, root: Path, image_size: int = FIXTURE_SIZE, **extra: object) -> Path:
    dataset = {"root": str(root), "image_size": image_size, "depth_range": [0, 65535], **extra}
    path.write_text(yaml.safe_dump({"dataset": dataset}), encoding="utf-8")
    return path


def toy_contrastive() -> ContrastiveConfig:
    return ContrastiveConfig(
        temperature=0.07,
        negatives_per_anchor=8,
        patches_per_image=16,
        embed_dim=16,
        layer_indices=(0, 4, 8),
    )


def toy_config(method: Method = Method.CUT, **overrides: object) -> TrainConfig:
    """Small networks that train on 32x32 fixtures in seconds on CPU."""
    values: dict[str, object] = {
        "method": method,
        "learning_rate": 2e-3,
        "batch_size": 2,
        "epochs": 1,
        "gan_mode": GanMode.LEAST_SQUARES,
        "n_res_blocks": 2,
        "image_size": FIXTURE_SIZE,
        "base_filters": 8,
        "d_layers": 1,
        "seed": 0,
        "contrastive": toy_contrastive() if method in (Method.CUT, Method.CUT_DEPTH) else None,
        "log_flush_interval": 1000,
    }
    values.update(overrides)
    return TrainConfig(**values)


@pytest.fixture
def varos_root(tmp_path: Path) -> Path:
    """Eight paired scenes 00000-00007 with depth."""
    return build_varos(tmp_path / "varos", range(8))


@pytest.fixture
def manifest(varos_root: Path) -> DatasetManifest:
    return DatasetManifest(root=varos_root, image_size=FIXTURE_SIZE, depth_range=(0.0, 65535.0))


@pytest.fixture
def manifest_file(tmp_path: Path, varos_root: Path) -> Path:
    return write_manifest(tmp_path / "manifest.yaml", varos_root)


@pytest.fixture
def deterministic_torch() -> Iterator[None]:
    """Restore torch's global determinism flag after a deterministic run."""
    yield
    torch.use_deterministic_algorithms(False)
