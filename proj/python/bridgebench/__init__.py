"""In-process MQTT 5.0 bridge benchmark.

A self-contained broker/client stack with a seeded network-impairment layer,
client-side transformer bridges in two deployment shapes, a fan-in load
driver, and a measurement pipeline. Configs are plain dicts (or JSON text /
file paths); run results come back as dicts mirroring the on-disk report.
"""

from __future__ import annotations

import json as _json
import os as _os
from typing import Any, Dict, List, Optional, Union

from ._core import (
    CodecError,
    ConfigError,
    InvalidTopology,
    MissingData,
    config_digest as _config_digest,
    decode_packet,
    drop_probability,
    encode_publish,
    generate_sensor_payload,
    load_config_text as _load_config_text,
    load_preset_text as _load_preset_text,
    parse_sensor_payload,
    plan_deployment_json as _plan_deployment_json,
    run_single_json as _run_single_json,
    run_sweep_json as _run_sweep_json,
    topic_filter_valid,
    topic_matches,
    topic_name_valid,
    transform_payload,
    validate_config as _validate_config,
    varint_decode,
    varint_encode,
    write_report,
)

__version__ = "0.1.0"

ConfigLike = Union[Dict[str, Any], str, "_os.PathLike[str]"]


def _config_text(config: ConfigLike) -> str:
    """Normalize a config given as dict, JSON text, or a file path."""
    if isinstance(config, dict):
        return _json.dumps(config)
    if isinstance(config, _os.PathLike):
        return _load_config_text(_os.fspath(config))
    if isinstance(config, str):
        if config.lstrip().startswith("{"):
            return config
        return _load_config_text(config)
    raise TypeError(f"config must be a dict, JSON text, or path, not {type(config)!r}")


def load_config(source: ConfigLike) -> Dict[str, Any]:
    """Load and normalize a scenario config into a dict."""
    return _json.loads(_config_text(source))


def load_preset(name: str, presets_dir: Union[str, "_os.PathLike[str]"]) -> Dict[str, Any]:
    """Load ``<presets_dir>/<name>.json`` into a config dict."""
    return _json.loads(_load_preset_text(name, _os.fspath(presets_dir)))


def validate(config: ConfigLike) -> List[str]:
    """Semantic problems with the config; an empty list means runnable."""
    return _validate_config(_config_text(config))


def digest(config: ConfigLike) -> str:
    """Stable 16-hex-digit digest of the normalized config."""
    return _config_digest(_config_text(config))


def plan_deployment(config: ConfigLike, aut: int = 0, scheme: str = "") -> Dict[str, Any]:
    """Bridge deployment plan for the config's providers.

    ``aut`` 0 and ``scheme`` "" fall back to the config's own values;
    otherwise pass 1 or 2 and "wildcard-15" or "explicit-29".
    """
    return _json.loads(_plan_deployment_json(_config_text(config), aut, scheme))


def run(config: ConfigLike, out_dir: str = "", quiet: bool = True) -> Dict[str, Any]:
    """Run the single cell selected by the config; returns the summary.

    A non-empty ``out_dir`` also writes results.csv, results.json, table.txt
    and the per-repetition raw artifacts there.
    """
    return _json.loads(_run_single_json(_config_text(config), out_dir, quiet))


def sweep(config: ConfigLike, out_dir: str = "", quiet: bool = True) -> Dict[str, Any]:
    """Run the full nine-cell architecture x topic-scheme x QoS matrix."""
    return _json.loads(_run_sweep_json(_config_text(config), out_dir, quiet))


__all__ = [
    "CodecError",
    "ConfigError",
    "InvalidTopology",
    "MissingData",
    "__version__",
    "config_digest",
    "decode_packet",
    "digest",
    "drop_probability",
    "encode_publish",
    "generate_sensor_payload",
    "load_config",
    "load_preset",
    "parse_sensor_payload",
    "plan_deployment",
    "run",
    "sweep",
    "topic_filter_valid",
    "topic_matches",
    "topic_name_valid",
    "transform_payload",
    "validate",
    "varint_decode",
    "varint_encode",
    "write_report",
]

# Same operation under the core module's name.
config_digest = digest
