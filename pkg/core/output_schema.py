"""Output record schema validation helper."""

from __future__ import annotations

import json
from numbers import Integral, Real

from core.config import repo_root

_CHECKS = {
    "string": lambda v: isinstance(v, str),
    "number": lambda v: isinstance(v, Real) and not isinstance(v, bool),
    "integer": lambda v: isinstance(v, Integral) and not isinstance(v, bool),
    "boolean": lambda v: isinstance(v, bool),
    "array": lambda v: isinstance(v, list),
    "object": lambda v: isinstance(v, dict),
    "null": lambda v: v is None,
}


def default_schema_path() -> str:
    return str(repo_root() / "configs" / "output_schema.json")


def load_schema(path: str | None = None) -> dict:
    with open(path or default_schema_path(), "r") as f:
        return json.load(f)


def _matches(value, ftype: str) -> bool:
    return any(_CHECKS[t](value) for t in ftype.split("|"))


def validate(record: dict, schema: dict) -> list[str]:
    kind = record.get("record")
    spec = schema.get("records", {}).get(kind)
    if spec is None:
        return [f"unknown_record:{kind}"]
    errors = []
    for name, ftype in spec.get("fields", {}).items():
        if name not in record:
            errors.append(f"missing:{name}")
        elif not _matches(record[name], ftype):
            errors.append(f"type:{name}")
    for name, ftype in spec.get("optional", {}).items():
        if name in record and not _matches(record[name], ftype):
            errors.append(f"type:{name}")
    allowed = {"record"} | set(spec.get("fields", {})) | set(spec.get("optional", {}))
    errors.extend(f"unexpected:{name}" for name in record if name not in allowed)
    return errors
