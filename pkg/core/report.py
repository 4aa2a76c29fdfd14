"""Report writer: JSON-lines records for every command."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import IO, Iterable

from core.errors import InternalConsistencyError
from core.output_schema import load_schema, validate


class JsonLinesWriter:
    """Validates each record against the shipped schema, then writes one line."""

    def __init__(self, stream: IO[str], schema: dict | None = None):
        self.stream = stream
        self.schema = schema if schema is not None else load_schema()
        self.count = 0

    def write(self, record: dict) -> None:
        errors = validate(record, self.schema)
        if errors:
            raise InternalConsistencyError(
                f"Output record '{record.get('record')}' violates the schema: {errors}", schema_errors=errors
            )
        self.stream.write(json.dumps(record, allow_nan=False) + "\n")
        self.count += 1

    def write_all(self, records: Iterable[dict]) -> None:
        for record in records:
            self.write(record)


def open_output(path: str | None) -> IO[str]:
    if not path or path == "-":
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w")


def write_error(payload: dict, stream: IO[str] | None = None) -> None:
    """One-line JSON error record on stderr."""
    stream = stream or sys.stderr
    stream.write(json.dumps(payload, default=str) + "\n")
    stream.flush()
