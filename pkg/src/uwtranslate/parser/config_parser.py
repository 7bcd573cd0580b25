"""YAML run-config parser for uwtranslate.

Parses run configuration files (sections ``train``, ``contrastive`` and ``data``) into
the dataclasses consumed by the trainers. Values are layered in this order: dataclass
defaults, the packaged recipe for ``train.method``, the user's file, ``--set`` overrides,
then the ``--seed`` / ``--deterministic`` flags.
"""

from __future__ import annotations

import copy
import difflib
import logging
import types
import typing
from collections.abc import Sequence
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from uwtranslate.core.types import ContrastiveConfig, Method, TrainConfig
from uwtranslate.errors import ConfigError

logger = logging.getLogger(__name__)

SECTIONS = ("train", "contrastive", "data")
DEFAULT_METHOD = Method.CUT
CONTRASTIVE_METHODS = (Method.CUT, Method.CUT_DEPTH)


@dataclass(frozen=True)
class DataConfig:
    """Which dataset a run trains on and how it is split."""

    manifest: Path | None = None
    # half-open sequence id ranges of the unpaired split
    source_range: tuple[int, int] = (1011, 2101)
    target_range: tuple[int, int] = (0, 1011)
    workers: int = 4
    side_by_side: bool = False

    def __post_init__(self) -> None:
        if self.manifest is not None:
            object.__setattr__(self, "manifest", Path(self.manifest))
        for name in ("source_range", "target_range"):
            value = tuple(int(v) for v in getattr(self, name))
            if len(value) != 2:
                raise ConfigError(f"data.{name} must be [lo, hi], got {list(value)}")
            object.__setattr__(self, name, value)
        if self.workers < 1:
            raise ConfigError(f"data.workers must be >= 1, got {self.workers}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "manifest": str(self.manifest) if self.manifest is not None else None,
            "source_range": list(self.source_range),
            "target_range": list(self.target_range),
            "workers": self.workers,
            "side_by_side": self.side_by_side,
        }


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run configuration."""

    train: TrainConfig
    data: DataConfig = field(default_factory=DataConfig)
    recipe: str | None = None

    def to_dict(self) -> dict[str, Any]:
        train = self.train.to_dict()
        contrastive = train.pop("contrastive")
        return {"train": train, "contrastive": contrastive, "data": self.data.to_dict()}


def _field_hints(cls: type, skip: tuple[str, ...] = ()) -> dict[str, Any]:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls) if f.name not in skip}


def section_fields() -> dict[str, dict[str, Any]]:
    """Field name to type hint, per config section."""
    return {
        "train": _field_hints(TrainConfig, skip=("contrastive",)),
        "contrastive": _field_hints(ContrastiveConfig),
        "data": _field_hints(DataConfig),
    }


def coerce_value(key: str, value: Any, hint: Any) -> Any:
    """Check a parsed YAML value against a field's type hint.

    Numbers written in exponent form without a dot (``2e-3``) load as strings in YAML 1.1
    and are converted here.

    Raises:
        ConfigError: Naming the dotted key when the value has the wrong type.
    """
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (types.UnionType, typing.Union):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return coerce_value(key, value, inner[0])
    if value is None:
        raise ConfigError(f"{key} cannot be empty")
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{key} must be a number, got {value!r}") from e
    if hint in (str, Path):
        if not isinstance(value, str) or not value:
            raise ConfigError(f"{key} must be a non-empty string, got {value!r}")
        return hint(value)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError as e:
            raise ConfigError(f"{key} must be one of {[m.value for m in hint]}, got {value!r}") from e
    if origin is tuple:
        if not isinstance(value, list | tuple):
            raise ConfigError(f"{key} must be a list, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(coerce_value(f"{key}[{i}]", v, args[0]) for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{key} must have {len(args)} entries, got {len(value)}")
        return tuple(coerce_value(f"{key}[{i}]", v, a) for i, (v, a) in enumerate(zip(value, args)))
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{key} must be a mapping, got {value!r}")
        return {str(k): coerce_value(f"{key}.{k}", v, args[1]) for k, v in value.items()}
    return value


def _unknown_key(key: str, known: Sequence[str]) -> ConfigError:
    message = f"unknown config key: {key}"
    close = difflib.get_close_matches(key, known, n=1)
    if close:
        message += f" (did you mean {close[0]}?)"
    return ConfigError(message)


class RecipeBook:
    """Per-method default hyperparameters loaded from ``recipes/*.yaml``."""

    def __init__(self, recipes_path: Path | None = None) -> None:
        """Initialize the recipe book.

        Args:
            recipes_path: Directory of recipe YAML files; defaults to the packaged recipes.
        """
        if recipes_path is None:
            recipes_path = Path(__file__).parent.parent / "recipes"

        self.recipes_path = recipes_path
        self.recipes: dict[str, dict[str, Any]] = {}

        self._load_recipes()

    def _load_recipes(self) -> None:
        if not self.recipes_path.exists():
            logger.warning("recipe directory %s does not exist", self.recipes_path)
            return
        for recipe_file in sorted(self.recipes_path.glob("*.yaml")):
            with open(recipe_file, encoding="utf-8") as f:
                data = yaml.safe_load(f)
            if data and "recipe" in data:
                recipe = data["recipe"]
                self.recipes[recipe.get("method", recipe_file.stem)] = recipe

    @property
    def methods(self) -> list[str]:
        return sorted(self.recipes)

    def get(self, method: Method) -> dict[str, Any]:
        """Sections of the recipe for ``method`` (empty when there is none)."""
        recipe = self.recipes.get(method.value, {})
        return copy.deepcopy({s: recipe[s] for s in SECTIONS if isinstance(recipe.get(s), dict)})

    def describe(self, method: Method) -> str:
        return str(self.recipes.get(method.value, {}).get("description", ""))


class YamlConfigParser:
    """Parser for uwtranslate YAML run configurations.

    Reads a YAML file with ``train``, ``contrastive`` and ``data`` sections, merges it
    over the method's recipe and produces a validated RunConfig.
    """

    def __init__(self, recipes: RecipeBook | None = None) -> None:
        self.recipes = recipes if recipes is not None else RecipeBook()
        self.fields = section_fields()

    def parse_file(
        self,
        file_path: Path,
        overrides: Sequence[str] = (),
        seed: int | None = None,
        deterministic: bool = False,
    ) -> RunConfig:
        """Parse a YAML run-config file.

        Args:
            file_path: Path to the YAML file.
            overrides: ``key=value`` strings applied after the file.
            seed: Seed that replaces ``train.seed`` when given.
            deterministic: Force ``train.deterministic``.

        Returns:
            Resolved run configuration. A relative ``data.manifest`` is resolved against
            the file's directory.

        Raises:
            ConfigError: If the file does not exist or any value is invalid.
        """
        if not file_path.exists():
            raise ConfigError(f"config file not found: {file_path}")

        with open(file_path, encoding="utf-8") as f:
            content = f.read()

        return self.parse_string(content, overrides, seed, deterministic, base_dir=file_path.parent)

    def parse_string(
        self,
        yaml_content: str,
        overrides: Sequence[str] = (),
        seed: int | None = None,
        deterministic: bool = False,
        base_dir: Path | None = None,
    ) -> RunConfig:
        """Parse a YAML run config from a string."""
        try:
            data = yaml.safe_load(yaml_content)
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed YAML: {e}") from e

        if data is None:
            raise ConfigError("Empty YAML content")

        self._validate(data)
        data = {section: dict(values or {}) for section, values in data.items()}
        for override in overrides:
            self._apply_override(data, override)
        if seed is not None:
            data.setdefault("train", {})["seed"] = seed
        if deterministic:
            data.setdefault("train", {})["deterministic"] = True
        return self._parse_raw(data, base_dir)

    def resolve_key(self, key: str) -> tuple[str, str, str | None]:
        """Map a dotted or bare override key to (section, field, sub-key).

        ``train.loss_weights.gan`` addresses one entry of a mapping field.

        Raises:
            ConfigError: If the key is unknown or a bare key is ambiguous.
        """
        parts = key.strip().split(".")
        known = [f"{s}.{name}" for s, names in self.fields.items() for name in names]
        if parts[0] in self.fields:
            if len(parts) < 2 or parts[1] not in self.fields[parts[0]]:
                raise _unknown_key(key, known)
            section, name, rest = parts[0], parts[1], parts[2:]
        else:
            owners = [s for s, names in self.fields.items() if parts[0] in names]
            if not owners:
                raise _unknown_key(key, known)
            if len(owners) > 1:
                choices = [f"{s}.{parts[0]}" for s in owners]
                raise ConfigError(f"ambiguous config key {parts[0]!r}; use one of {choices}")
            section, name, rest = owners[0], parts[0], parts[1:]
        if len(rest) > 1 or (rest and typing.get_origin(self.fields[section][name]) is not dict):
            raise _unknown_key(key, known)
        return section, name, rest[0] if rest else None

    def _apply_override(self, data: dict[str, Any], override: str) -> None:
        key, sep, text = override.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override {override!r} must look like key=value")
        section, name, sub_key = self.resolve_key(key)
        try:
            value = yaml.safe_load(text) if text.strip() else None
        except yaml.YAMLError as e:
            raise ConfigError(f"override {key}: cannot parse value {text!r}") from e
        target = data.get(section)
        if not isinstance(target, dict):
            target = data[section] = {}
        if sub_key is None:
            target[name] = value
        else:
            mapping = target.get(name)
            if not isinstance(mapping, dict):
                mapping = target[name] = {}
            mapping[sub_key] = value
        logger.debug("override %s.%s%s = %r", section, name, f".{sub_key}" if sub_key else "", value)

    def _coerce_section(self, section: str, raw: dict[str, Any]) -> dict[str, Any]:
        hints = self.fields[section]
        return {name: coerce_value(f"{section}.{name}", value, hints[name]) for name, value in raw.items()}

    def _parse_raw(self, data: dict[str, Any], base_dir: Path | None = None) -> RunConfig:
        """Convert the raw YAML dict to a RunConfig, merged over the method recipe."""
        train_raw = dict(data.get("train") or {})
        method = coerce_value("train.method", train_raw.get("method", DEFAULT_METHOD.value), Method)
        recipe = self.recipes.get(method)
        if not recipe:
            logger.warning("no recipe for method %s; using built-in defaults", method.value)

        train_values = self._coerce_section("train", {**recipe.get("train", {}), **train_raw, "method": method})

        contrastive_raw = data.get("contrastive") or {}
        contrastive = None
        if method in CONTRASTIVE_METHODS or contrastive_raw:
            contrastive_values = self._coerce_section(
                "contrastive", {**recipe.get("contrastive", {}), **contrastive_raw}
            )
            contrastive = ContrastiveConfig(**contrastive_values)

        data_values = self._coerce_section("data", {**recipe.get("data", {}), **(data.get("data") or {})})
        manifest = data_values.get("manifest")
        if manifest is not None and not manifest.is_absolute() and base_dir is not None:
            data_values["manifest"] = base_dir / manifest

        return RunConfig(
            train=TrainConfig(contrastive=contrastive, **train_values),
            data=DataConfig(**data_values),
            recipe=method.value if recipe else None,
        )

    def _validate(self, data: Any) -> None:
        """Validate the structure of the raw YAML data.

        Raises:
            ConfigError: If the document is not a mapping of known sections and keys.
        """
        if not isinstance(data, dict):
            raise ConfigError("YAML data must be a dictionary")

        for section, values in data.items():
            if section not in self.fields:
                raise ConfigError(f"unknown config section: {section!r}; expected one of {list(SECTIONS)}")
            if values is None:
                continue
            if not isinstance(values, dict):
                raise ConfigError(f"Field '{section}' must be a dictionary")
            known = [f"{section}.{name}" for name in self.fields[section]]
            for name in values:
                if name not in self.fields[section]:
                    raise _unknown_key(f"{section}.{name}", known)


def write_resolved_config(config: RunConfig, path: Path) -> Path:
    """Snapshot every resolved section to YAML; the file parses back to the same config."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False, default_flow_style=None)
    return path
