"""Matrix files: comma-separated rows or a JSON 2-D array."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import NonSquare, ParseError


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def parse_matrix_text(text: str, fmt: str = "auto") -> np.ndarray:
    """Parse CSV or JSON text into a square float array.

    Ragged or non-numeric CSV raises ParseError naming the 1-based line.
    """
    if fmt == "auto":
        fmt = "json" if text.lstrip().startswith("[") else "csv"
    if fmt == "json":
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
        if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
            raise ParseError("JSON matrix must be a list of lists")
        widths = {len(r) for r in rows}
        if len(widths) > 1:
            raise ParseError("JSON matrix rows have different lengths")
        try:
            a = np.array(rows, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"non-numeric JSON entry: {exc}") from exc
    elif fmt == "csv":
        rows = []
        width = None
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            fields = line.split(",")
            try:
                row = [float(f) for f in fields]
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"line {lineno}: expected {width} fields, got {len(row)}")
            rows.append(row)
        if not rows:
            raise ParseError("empty matrix file")
        a = np.array(rows, dtype=np.float64)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.size == 0:
        raise NonSquare(f"matrix has shape {a.shape}")
    return a


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    fmt = "json" if path.suffix.lower() == ".json" else "auto"
    return parse_matrix_text(path.read_text(encoding="utf-8"), fmt)


def matrix_to_csv(a) -> str:
    a = np.asarray(a, dtype=np.float64)
    return "".join(",".join(format_float(x) for x in row) + "\n" for row in a)


def write_matrix(path, a):
    path = Path(path)
    a = np.asarray(a, dtype=np.float64)
    if path.suffix.lower() == ".json":
        body = ",\n ".join("[" + ", ".join(format_float(x) for x in row) + "]" for row in a)
        path.write_text("[" + body + "]\n", encoding="utf-8")
    else:
        path.write_text(matrix_to_csv(a), encoding="utf-8")
