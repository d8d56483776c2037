import hashlib
import json
import logging
import logging.config
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from .errors import ConfigurationError
from ..schemas.config import LoggingSettings, RunConfig

load_dotenv()

VERSION = "1.0.0"

LOGGING_INI = Path(__file__).resolve().parent.parent.parent / "logging.ini"

# Environment overrides, all optional
ENV_KEYS = {
    "ANNOTATION_SEED": ("seed", int),
    "ANNOTATION_JOBS": ("jobs", int),
    "ANNOTATION_LANGUAGE": ("language", str),
}


def configure_logging(verbose: bool = False) -> None:
    """Load logging.ini and apply the verbosity flag / env level."""
    if LOGGING_INI.exists():
        logging.config.fileConfig(LOGGING_INI, disable_existing_loggers=False)
    else:
        logging.basicConfig(format="%(levelname)-5.5s [%(name)s] %(message)s")

    level = "DEBUG" if verbose else os.getenv("ANNOTATION_LOG_LEVEL")
    try:
        settings = LoggingSettings(level=level)
    except ValidationError as e:
        raise ConfigurationError(f"ANNOTATION_LOG_LEVEL={level!r} is not a logging level") from e
    if settings.level:
        logging.getLogger("app").setLevel(settings.level)


def _env_layer() -> Dict[str, Any]:
    layer: Dict[str, Any] = {}
    for env_name, (field, cast) in ENV_KEYS.items():
        raw = os.getenv(env_name)
        if raw is None or raw == "":
            continue
        try:
            layer[field] = cast(raw)
        except ValueError as e:
            raise ConfigurationError(f"{env_name}={raw!r} is not a valid {cast.__name__}") from e
    return layer


def _read_config_file(path: Path) -> Dict[str, Any]:
    try:
        with path.open("r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must hold a JSON object")
    return data


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(
    config_path: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Build the effective config: flags > config file > environment > defaults"""

    layers: Dict[str, Any] = _env_layer()
    if config_path is not None:
        layers = _merge(layers, _read_config_file(Path(config_path)))
    if overrides:
        layers = _merge(layers, overrides)

    try:
        return RunConfig.model_validate(layers)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
