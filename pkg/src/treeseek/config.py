"""INI configuration files for the CLI.

Three sections, all optional:

    [search]            engine knobs, same names as SearchConfig fields
    [llm]               remote chat endpoint (LlmEndpointConfig fields)
    [search_endpoint]   remote web-search endpoint (SearchEndpointConfig fields)

Values given on the command line win over the file, which wins over the
built-in defaults.  Unknown sections or keys are configuration errors so that
typos fail loudly instead of silently running with defaults.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path

from .errors import ConfigurationError
from .orchestrator import SearchConfig
from .remote import LlmEndpointConfig, SearchEndpointConfig

_SECTIONS = ("search", "llm", "search_endpoint")

_SEARCH_TYPES = {f.name: f.type for f in dataclass_fields(SearchConfig)}


@dataclass
class FileConfig:
    """Parsed contents of one INI file."""

    search: dict = field(default_factory=dict)
    llm: LlmEndpointConfig | None = None
    search_endpoint: SearchEndpointConfig | None = None


def _coerce(section: str, key: str, raw: str, target_type: str):
    try:
        if target_type == "int":
            return int(raw)
        if target_type == "float":
            return float(raw)
        if target_type == "bool":
            lowered = raw.strip().casefold()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigurationError(
            f"[{section}] {key}: cannot interpret {raw!r} as {target_type}"
        ) from None


def _parse_search_section(parser: configparser.ConfigParser) -> dict:
    values = {}
    for key, raw in parser.items("search"):
        if key not in _SEARCH_TYPES:
            raise ConfigurationError(f"[search] has no option named {key!r}")
        values[key] = _coerce("search", key, raw, _SEARCH_TYPES[key])
    return values


def _parse_endpoint_section(parser, section: str, config_cls):
    known = {f.name: f for f in dataclass_fields(config_cls)}
    values = {}
    for key, raw in parser.items(section):
        if key not in known:
            raise ConfigurationError(f"[{section}] has no option named {key!r}")
        ftype = known[key].type
        if key == "retry_backoff":
            try:
                values[key] = tuple(float(part) for part in raw.split(",") if part.strip())
            except ValueError:
                raise ConfigurationError(
                    f"[{section}] retry_backoff: expected comma-separated numbers, got {raw!r}"
                ) from None
        elif ftype == "int":
            values[key] = _coerce(section, key, raw, "int")
        elif ftype == "float":
            values[key] = _coerce(section, key, raw, "float")
        else:
            values[key] = raw
    if "base_url" not in values:
        raise ConfigurationError(f"[{section}] requires base_url")
    try:
        return config_cls(**values)
    except TypeError as exc:
        raise ConfigurationError(f"[{section}]: {exc}") from None


def load_config_file(path: str | Path) -> FileConfig:
    """Read one INI file; raises ConfigurationError on anything suspect."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as handle:
            parser.read_file(handle)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigurationError(f"unknown config section [{section}] in {path}")

    loaded = FileConfig()
    if parser.has_section("search"):
        loaded.search = _parse_search_section(parser)
    if parser.has_section("llm"):
        if not parser.has_option("llm", "model_name"):
            raise ConfigurationError("[llm] requires model_name")
        loaded.llm = _parse_endpoint_section(parser, "llm", LlmEndpointConfig)
    if parser.has_section("search_endpoint"):
        loaded.search_endpoint = _parse_endpoint_section(
            parser, "search_endpoint", SearchEndpointConfig
        )
    return loaded


def merged_search_config(file_values: dict, flag_values: dict) -> SearchConfig:
    """Apply precedence: command-line flag > config file > default."""
    values = dict(file_values)
    values.update({k: v for k, v in flag_values.items() if v is not None})
    try:
        config = SearchConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
    config.validate()
    return config
