"""Task similarity from measured zero-shot transfer errors.

For tasks A and B, with ``r(A->B)`` the error on B of a model trained on
A divided by the label-shuffled chance error of the same evaluation::

    rho_AB = 1 - (sqrt(r(A->B)) + sqrt(r(B->A))) / 2

In the linear teacher-student model ``r = (1 - rho)^2`` in both directions,
so the estimate is exact there.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NegativeTransferError, NonpositiveBaseline, ParseError, ShapeMismatch, TaskOrderError
from .taskspec import TOL_PSD, CorrelationMatrix, validate_correlation


@dataclass(frozen=True, eq=False)
class TransferErrorTable:
    """``transfer[nu, mu]`` is the error on task ``mu`` after training on ``nu``."""

    transfer: np.ndarray
    baseline: np.ndarray

    def __post_init__(self):
        t = np.array(self.transfer, dtype=float)
        b = np.array(self.baseline, dtype=float)
        for name, a in (("transfer", t), ("baseline", b)):
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ShapeMismatch(f"{name} matrix must be square, got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ParseError(f"{name} matrix has non-finite entries")
        if t.shape != b.shape:
            raise ShapeMismatch(f"transfer is {t.shape} but baseline is {b.shape}")
        if np.any(t < 0):
            i, j = np.argwhere(t < 0)[0]
            raise NegativeTransferError(f"transfer[{i}, {j}] = {t[i, j]} is negative")
        if np.any(b <= 0):
            i, j = np.argwhere(b <= 0)[0]
            raise NonpositiveBaseline(f"baseline[{i}, {j}] = {b[i, j]} must be positive")
        object.__setattr__(self, "transfer", t)
        object.__setattr__(self, "baseline", b)

    @property
    def P(self) -> int:
        return self.transfer.shape[0]

    def ratios(self) -> np.ndarray:
        return self.transfer / self.baseline


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    rho: np.ndarray
    clamped: np.ndarray
    asymmetry: np.ndarray

    @property
    def P(self) -> int:
        return self.rho.shape[0]

    @property
    def any_clamped(self) -> bool:
        return bool(self.clamped.any())

    def is_psd(self, tol: float = TOL_PSD) -> bool:
        return bool(np.linalg.eigvalsh(self.rho)[0] >= -tol)

    def to_correlation(self, project: bool = False) -> CorrelationMatrix:
        """Validated correlation matrix.

        Without ``project`` a non-PSD estimate raises ``NotPSD``. With it,
        the nearest-by-eigenvalue-clamping PSD matrix is used instead; this
        is an approximation and callers should label results accordingly.
        """
        if project:
            return validate_correlation(project_psd(self.rho))
        return validate_correlation(self.rho)


def estimate_similarity(table: TransferErrorTable, clamp_lo: float = -1.0, clamp_hi: float = 1.0) -> SimilarityMatrix:
    """Pairwise similarity from both transfer directions.

    Entries outside ``[clamp_lo, clamp_hi]`` are clamped and flagged.
    ``asymmetry[i, j]`` is ``|sqrt(r(i->j)) - sqrt(r(j->i))| / 2``, a
    diagnostic for how far the pair is from the linear-model picture.
    """
    if not clamp_lo < clamp_hi:
        raise TaskOrderError(f"clamp_lo ({clamp_lo}) must be below clamp_hi ({clamp_hi})")
    root = np.sqrt(table.ratios())
    raw = 1.0 - 0.5 * (root + root.T)
    asym = 0.5 * np.abs(root - root.T)
    clamped = (raw < clamp_lo) | (raw > clamp_hi)
    rho = np.clip(raw, clamp_lo, clamp_hi)
    np.fill_diagonal(rho, 1.0)
    np.fill_diagonal(clamped, False)
    np.fill_diagonal(asym, 0.0)
    return SimilarityMatrix(rho, clamped, asym)


def project_psd(rho: np.ndarray) -> np.ndarray:
    """Clamp negative eigenvalues to zero, then rescale to a unit diagonal."""
    rho = np.asarray(rho, dtype=float)
    w, v = np.linalg.eigh(0.5 * (rho + rho.T))
    c = (v * np.clip(w, 0.0, None)) @ v.T
    d = np.sqrt(np.diag(c))
    if np.any(d <= 0):
        raise TaskOrderError("projection collapsed a task to zero variance")
    c = c / np.outer(d, d)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return np.clip(c, -1.0, 1.0)


def linear_transfer_table(rho, baseline: float = 1.0) -> TransferErrorTable:
    """Transfer table the linear model predicts for input similarity ``rho``."""
    rho = np.asarray(rho, dtype=float)
    return TransferErrorTable(baseline * (1.0 - rho) ** 2, np.full(rho.shape, float(baseline)))


def _table_from_mapping(doc) -> TransferErrorTable:
    if not isinstance(doc, dict):
        raise ParseError("transfer table must be a JSON object")
    missing = [k for k in ("transfer", "baseline") if k not in doc]
    if missing:
        raise ParseError(f"transfer table is missing {', '.join(missing)}")
    try:
        t = np.array(doc["transfer"], dtype=float)
        b = np.array(doc["baseline"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrices must be numeric and rectangular: {exc}") from exc
    return TransferErrorTable(t, b)


def load_table(source) -> TransferErrorTable:
    """Read ``{"transfer": [[...]], "baseline": [[...]]}``.

    ``source`` may be a dict, a JSON string or a path to a JSON file.
    """
    if isinstance(source, dict):
        return _table_from_mapping(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        if not os.path.exists(source):
            raise ParseError(f"no such file: {source}")
        source = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return _table_from_mapping(doc)


def _read_matrix_csv(path) -> np.ndarray:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if rows and not _is_numeric(rows[0]):
        rows = rows[1:]
    try:
        return np.array([[float(x) for x in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _is_numeric(row) -> bool:
    try:
        [float(x) for x in row]
    except ValueError:
        return False
    return True


def load_table_csv(transfer_path, baseline_path) -> TransferErrorTable:
    """Two-file variant: one square matrix per CSV, optional header row."""
    t = _read_matrix_csv(transfer_path)
    b = _read_matrix_csv(baseline_path)
    return TransferErrorTable(t, b)
