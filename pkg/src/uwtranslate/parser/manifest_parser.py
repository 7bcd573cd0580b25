"""Dataset manifest parser.

A manifest is a YAML document with one ``dataset`` mapping::

    dataset:
      root: /data/varos          # default: $UWT_DATA_ROOT
      folders: {uniform_lighting: B, underwater: A, depth: depth}
      depth_range: [0, 65535]
      image_size: 256
      matcher: basename
"""

import logging
import os
from pathlib import Path
from typing import Any

import yaml

from uwtranslate.data.image_io import RASTER_EXTENSIONS
from uwtranslate.data.manifest import ROLE_ALIGNED, ROLE_DEPTH, ROLE_UNDERWATER, ROLE_UNIFORM_LIGHTING, DatasetManifest
from uwtranslate.errors import ConfigError, DataError
from uwtranslate.parser.config_parser import coerce_value

logger = logging.getLogger(__name__)

ENV_DATA_ROOT = "UWT_DATA_ROOT"
MANIFEST_KEYS = ("root", "folders", "depth_range", "image_size", "matcher", "extensions")
ROLES = (ROLE_UNIFORM_LIGHTING, ROLE_UNDERWATER, ROLE_DEPTH, ROLE_ALIGNED)


def parse_manifest(path: Path, image_size: int | None = None) -> DatasetManifest:
    """Read a manifest file.

    Args:
        path: Manifest YAML file.
        image_size: Working resolution that replaces the manifest's own ``image_size``.

    Raises:
        ConfigError: If the file is missing, malformed, or declares invalid values.
    """
    if not path.is_file():
        raise ConfigError(f"dataset manifest not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: malformed YAML: {e}") from e
    return manifest_from_dict(data, base_dir=path.parent, image_size=image_size)


def _root(dataset: dict[str, Any], base_dir: Path) -> Path:
    if dataset.get("root"):
        root = Path(coerce_value("dataset.root", dataset["root"], str)).expanduser()
        # relative roots are relative to the manifest, not the working directory
        return root if root.is_absolute() else base_dir / root
    env_root = os.environ.get(ENV_DATA_ROOT)
    if not env_root:
        raise ConfigError(f"dataset.root is not set and ${ENV_DATA_ROOT} is undefined")
    return Path(env_root).expanduser()


def manifest_from_dict(data: Any, base_dir: Path, image_size: int | None = None) -> DatasetManifest:
    if not isinstance(data, dict) or not isinstance(data.get("dataset"), dict):
        raise ConfigError("manifest must contain a 'dataset' mapping")
    dataset = data["dataset"]
    unknown = sorted(set(dataset) - set(MANIFEST_KEYS))
    if unknown:
        raise ConfigError(f"unknown manifest keys: {[f'dataset.{k}' for k in unknown]}")

    kwargs: dict[str, Any] = {"root": _root(dataset, base_dir)}
    if "folders" in dataset:
        folders = coerce_value("dataset.folders", dataset["folders"], dict[str, str])
        bad_roles = sorted(set(folders) - set(ROLES))
        if bad_roles:
            raise ConfigError(f"dataset.folders: unknown roles {bad_roles}; expected {list(ROLES)}")
        kwargs["folders"] = folders
    if "depth_range" in dataset:
        kwargs["depth_range"] = coerce_value("dataset.depth_range", dataset["depth_range"], tuple[float, float])
    if "image_size" in dataset:
        kwargs["image_size"] = coerce_value("dataset.image_size", dataset["image_size"], int)
    if image_size is not None:
        if kwargs.get("image_size", image_size) != image_size:
            logger.info("manifest image_size %d replaced by %d", kwargs["image_size"], image_size)
        kwargs["image_size"] = image_size
    if "matcher" in dataset:
        kwargs["matcher"] = coerce_value("dataset.matcher", dataset["matcher"], str)
    extensions = dataset.get("extensions")
    if extensions is not None:
        extensions = coerce_value("dataset.extensions", extensions, tuple[str, ...])
        kwargs["extensions"] = tuple(e if e.startswith(".") else f".{e}" for e in extensions)
    else:
        kwargs["extensions"] = RASTER_EXTENSIONS

    try:
        return DatasetManifest(**kwargs)
    except DataError as e:
        raise ConfigError(f"invalid dataset manifest: {e}") from e
