"""CSV and JSON formats shared by the command line and the scripts.

CSV files are comma-separated with a header row, ``.`` decimals, UTF-8
and LF line endings. Floats are written in shortest round-trip form so they
read back bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .taskspec import CorrelationMatrix, validate_correlation


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    path = Path(path)
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c, "")) for c in columns])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def matrix_to_csv(m: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    P = m.shape[0]
    w.writerow([f"task_{k + 1}" for k in range(P)])
    for row in np.asarray(m, dtype=float):
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows:
        raise ParseError("empty matrix CSV")
    if rows[0] and rows[0][0].startswith("task_"):
        rows = rows[1:]
    try:
        return np.array([[float(x) for x in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ParseError(f"bad matrix CSV: {exc}") from exc


def correlation_to_json(c: CorrelationMatrix) -> dict:
    return {"size": c.size, "entries": c.entries.tolist()}


def load_correlation(path) -> CorrelationMatrix:
    """Read a correlation matrix from ``.json`` (``{"size", "entries"}``) or CSV."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
            entries = np.array(doc["entries"], dtype=float)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: expected {{'size', 'entries'}}: {exc}") from exc
        if "size" in doc and entries.shape != (doc["size"], doc["size"]):
            raise ParseError(f"{path}: size {doc['size']} does not match entries {entries.shape}")
        return validate_correlation(entries)
    return validate_correlation(matrix_from_csv(text))


def save_correlation(path, c) -> Path:
    path = Path(path)
    entries = c.entries if isinstance(c, CorrelationMatrix) else np.asarray(c, dtype=float)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps({"size": entries.shape[0], "entries": entries.tolist()}) + "\n", encoding="utf-8")
    else:
        path.write_text(matrix_to_csv(entries), encoding="utf-8")
    return path


def json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def dump_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=json_default) + "\n", encoding="utf-8")
    return path
