"""Run-config and dataset-manifest parsing."""

from uwtranslate.parser.config_parser import (
    DataConfig,
    RecipeBook,
    RunConfig,
    YamlConfigParser,
    coerce_value,
    write_resolved_config,
)
from uwtranslate.parser.manifest_parser import ENV_DATA_ROOT, manifest_from_dict, parse_manifest

__all__ = [
    "DataConfig",
    "ENV_DATA_ROOT",
    "RecipeBook",
    "RunConfig",
    "YamlConfigParser",
    "coerce_value",
    "manifest_from_dict",
    "parse_manifest",
    "write_resolved_config",
]
