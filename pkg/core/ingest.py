"""CSV ingestion of sample data: a one-line header, then ``x[,y[,z]],value`` rows."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from core.correlation import Location
from core.errors import DataFileError
from core.kriging import SampleSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataFile:
    header: tuple[str, ...]
    rows: tuple[tuple[float, ...], ...]

    @property
    def dimension(self) -> int:
        return len(self.header) - 1

    def to_samples(self) -> SampleSet:
        return SampleSet(
            tuple(Location(row[:-1]) for row in self.rows),
            tuple(row[-1] for row in self.rows),
        )


def _cell(raw: str, path: str, line: int, column: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DataFileError(f"line {line}: column '{column}' is not a number: {raw.strip()!r}", path, line)
    if not math.isfinite(value):
        raise DataFileError(f"line {line}: column '{column}' is not finite: {raw.strip()!r}", path, line)
    return value


def read_data_file(path: str) -> DataFile:
    p = Path(path)
    try:
        with open(p, "r", newline="") as f:
            lines = list(csv.reader(f))
    except FileNotFoundError:
        raise DataFileError(f"Data file not found: {path}", str(path))
    except (OSError, UnicodeDecodeError, csv.Error) as e:
        raise DataFileError(f"Cannot read data file {path}: {e}", str(path))

    if not lines:
        raise DataFileError("Data file is empty (a header line is required)", str(path), 1)
    header = tuple(c.strip() for c in lines[0])
    if not 2 <= len(header) <= 4:
        raise DataFileError(
            f"line 1: header must name 1..3 coordinate columns and a value column, got {len(header)} columns",
            str(path),
            1,
        )

    rows = []
    for line_no, cells in enumerate(lines[1:], start=2):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            raise DataFileError(
                f"line {line_no}: expected {len(header)} columns, got {len(cells)}", str(path), line_no
            )
        rows.append(tuple(_cell(c, str(path), line_no, name) for c, name in zip(cells, header)))

    if not rows:
        raise DataFileError("Data file has a header but no data rows", str(path))
    return DataFile(header=header, rows=tuple(rows))


def ingest(path: str, dimension_hint: int | None = None) -> SampleSet:
    data = read_data_file(path)
    if dimension_hint is not None and data.dimension != dimension_hint:
        raise DataFileError(
            f"Data file has {data.dimension} coordinate columns, expected {dimension_hint}", str(path)
        )
    counts = Counter(row[:-1] for row in data.rows)
    duplicates = [loc for loc, c in counts.items() if c > 1]
    if duplicates:
        # kept as-is: the solver rejects the singular system later
        logger.warning("%d duplicate sample location(s) in %s, e.g. %s", len(duplicates), path, duplicates[0])
    return data.to_samples()


def write_samples(path: str, samples: SampleSet) -> str:
    names = ["x", "y", "z"][: samples.dimension] + ["value"]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(names)
        for loc, value in zip(samples.locations, samples.values):
            writer.writerow([f"{c:.17g}" for c in loc.coords] + [f"{value:.17g}"])
    return str(path)
