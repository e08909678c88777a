"""CSV reading and writing with stable, byte-reproducible formatting."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import ParseError
from .pls import Dataset


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        # repr is the shortest round-tripping form, so output is byte-stable
        return repr(v)
    return str(v)


def write_rows(path, rows, columns=None):
    """Write dict rows; missing keys become empty cells."""
    rows = list(rows)
    if columns is None:
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])
    return path


def write_dataset(path, data: Dataset):
    names = data.column_names or tuple(f"x{j + 1}" for j in range(data.p))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(names) + ["y"])
        for xi, yi in zip(data.X, data.y):
            writer.writerow([format_value(float(v)) for v in xi] + [format_value(float(yi))])


def write_matrix(path, M, names):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in np.asarray(M):
            writer.writerow([format_value(float(v)) for v in row])


def read_dataset(path, response: str = "y", family: str = "gaussian") -> Dataset:
    """Read a header-first CSV; every column except ``response`` is a predictor."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        header = [h.strip() for h in header]
        if response not in header:
            raise ParseError(f"response column {response!r} not found in header", 1)
        yi = header.index(response)
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", lineno)
            try:
                rows.append([float(c) for c in rec])
            except ValueError as exc:
                raise ParseError(f"non-numeric value ({exc})", lineno) from None
    if not rows:
        raise ParseError("no data rows", 2)
    arr = np.array(rows)
    names = [h for i, h in enumerate(header) if i != yi]
    X = np.delete(arr, yi, axis=1)
    return Dataset(X, arr[:, yi], family, names)
