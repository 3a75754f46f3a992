"""JSON loading and schema checks shared by the config readers."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import jsonschema


class ConfigError(ValueError):
    """A configuration file is unreadable or does not match its schema."""


def json_pointer(path) -> str:
    parts = [str(p).replace("~", "~0").replace("/", "~1") for p in path]
    return "/" + "/".join(parts) if parts else ""


def check_schema(data: Any, schema: Mapping) -> None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{json_pointer(e.absolute_path) or '/'}: {e.message}" for e in errors]
        raise ConfigError("schema violation:\n  " + "\n  ".join(lines))


def load_json(path) -> Any:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
