from __future__ import annotations
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional
import yaml
from dotenv import load_dotenv
from pydantic import ValidationError as PydanticValidationError
from .exceptions import ConfigError
from .model import GlobalConfig

DEFAULT_CONFIG_NAME = "pokelab.yaml"
CONFIG_ENV_VAR = "POKE_CONFIG"


def resolve_config_path(explicit: Optional[str] = None) -> Optional[Path]:
    """--config wins, then $POKE_CONFIG (a .env file counts), then ./pokelab.yaml."""
    if explicit:
        return Path(explicit)
    load_dotenv()
    env_path = os.getenv(CONFIG_ENV_VAR)
    if env_path:
        return Path(env_path)
    local = Path(DEFAULT_CONFIG_NAME)
    return local if local.exists() else None


def load_config(path: str | Path | None = None) -> GlobalConfig:
    resolved = resolve_config_path(str(path) if path else None)
    if resolved is None:
        return GlobalConfig()
    if not resolved.exists():
        raise ConfigError(f"config file not found: {resolved}")
    try:
        data = yaml.safe_load(resolved.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid yaml in {resolved}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping: {resolved}")
    try:
        return GlobalConfig.model_validate(data)
    except PydanticValidationError as e:
        raise ConfigError(str(e)) from e


def apply_overrides(cfg: GlobalConfig, section: str, **values: Any) -> GlobalConfig:
    """Return a copy of cfg with non-None flag values merged into one section."""
    updates = {k: v for k, v in values.items() if v is not None}
    if not updates:
        return cfg
    current = getattr(cfg, section).model_dump(by_alias=True)
    for key, val in updates.items():
        field = type(getattr(cfg, section)).model_fields.get(key)
        name = field.alias if field is not None and field.alias else key
        current[name] = val
    try:
        merged = type(getattr(cfg, section)).model_validate(current)
    except PydanticValidationError as e:
        raise ConfigError(str(e)) from e
    return cfg.model_copy(update={section: merged})


def config_dict(cfg: GlobalConfig) -> Dict[str, Any]:
    return cfg.model_dump(mode="json", by_alias=True)


def config_yaml(cfg: GlobalConfig) -> str:
    return yaml.safe_dump(config_dict(cfg), sort_keys=False)


def config_json(cfg: GlobalConfig) -> str:
    return json.dumps(config_dict(cfg), sort_keys=True, separators=(",", ":"))
