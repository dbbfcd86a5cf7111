from __future__ import annotations

import configparser
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from rclab.exceptions import ConfigError
from rclab.models.config import ExperimentConfig

THREADS_ENV = "RCLAB_THREADS"
_SECTION = "rclab"


def read_config_file(path: Path) -> Dict[str, str]:
    """Parameters from an INI file with a [rclab] section, or a plain key=value file."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read configuration file {path}.") from exc

    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        if any(line.strip().startswith("[") for line in text.splitlines()):
            cp.read_string(text, source=str(path))
        else:
            cp.read_string(f"[{_SECTION}]\n{text}", source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"Invalid configuration format in {path.name}.") from exc

    if not cp.has_section(_SECTION):
        raise ConfigError(
            f"Invalid configuration: missing [{_SECTION}] section in {path.name}."
        )
    return {key: value.strip() for key, value in cp.items(_SECTION)}


def default_threads() -> Optional[int]:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or not raw.strip():
        return None
    try:
        threads = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}.") from exc
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1, got {threads}.")
    return threads


def resolve_config(
    command: str,
    flags: Mapping[str, Any],
    config_path: Optional[Path] = None,
) -> ExperimentConfig:
    """Merge environment defaults, the config file and flags, last one winning."""
    params: Dict[str, Any] = {}
    threads = default_threads()
    if threads is not None:
        params["threads"] = threads
    if config_path is not None:
        params.update(read_config_file(config_path))
    params.update({k: v for k, v in flags.items() if v is not None})
    return ExperimentConfig(command, params)
