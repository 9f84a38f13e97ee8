"""Closed-form expected final error of sequential training on correlated tasks.

With ``U`` the strict upper triangle of the input similarity ``C_in`` and
``S`` the symmetric square root of the output similarity ``C_out``, the
ensemble-averaged error summed over tasks is::

    eps = || S (I - (I + U)^-1 C_in) ||_F^2
        = || S (I + U)^-1 U^T ||_F^2

Only the strict upper triangle enters, which is why task order matters.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import MOutOfRange, NotPSD
from .taskspec import TOL_PSD, CorrelationMatrix, Ordering, TaskSetSpec, apply_ordering

CLAMP_TOL = 1e-12


def strict_upper(c) -> np.ndarray:
    """Entries strictly above the diagonal; zeros elsewhere."""
    entries = c.entries if isinstance(c, CorrelationMatrix) else np.asarray(c, dtype=float)
    return np.triu(entries, 1)


def unit_upper_inverse(m: np.ndarray) -> np.ndarray:
    """``(I + M)^-1`` for strictly upper-triangular ``M`` by back-substitution."""
    m = np.asarray(m, dtype=float)
    eye = np.eye(m.shape[0])
    return solve_triangular(eye + m, eye, lower=False, unit_diagonal=True)


def uniform_upper_inverse(m: float, P: int) -> np.ndarray:
    """Closed-form inverse of ``I + m * (strict upper ones)``.

    Entry ``(i, j)`` is ``delta_ij - m (1 - m)^(j - i - 1)`` for ``j > i``.
    """
    if not -1.0 < m < 1.0:
        raise MOutOfRange(f"m must lie in (-1, 1), got {m}")
    i, j = np.indices((P, P))
    gap = j - i
    out = np.where(gap > 0, -m * (1.0 - m) ** np.maximum(gap - 1, 0), 0.0)
    out[np.diag_indices(P)] = 1.0
    return out


def psd_sqrt(c, tol: float = TOL_PSD) -> np.ndarray:
    """Symmetric square root via eigendecomposition.

    Eigenvalues in ``[-tol, tol)`` are treated as zero; anything more
    negative raises :class:`NotPSD`.
    """
    entries = c.entries if isinstance(c, CorrelationMatrix) else np.asarray(c, dtype=float)
    w, v = np.linalg.eigh(entries)
    if w.size and w[0] < -tol:
        raise NotPSD(w[0], tol)
    w = np.where(w < tol, 0.0, w)
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def _clamp(value: float) -> float:
    if -CLAMP_TOL <= value < 0.0:
        return 0.0
    return float(value)


def final_error(spec: TaskSetSpec) -> float:
    """Expected final error summed over tasks, in the ``I - (I+U)^-1 C`` form."""
    c_in = spec.c_in.entries
    inv = unit_upper_inverse(strict_upper(c_in))
    resid = np.eye(spec.P) - inv @ c_in
    return _clamp(np.sum((psd_sqrt(spec.c_out) @ resid) ** 2))


def final_error_upper_form(spec: TaskSetSpec) -> float:
    """Same quantity through the ``(I+U)^-1 U^T`` form."""
    u = strict_upper(spec.c_in)
    resid = unit_upper_inverse(u) @ u.T
    return _clamp(np.sum((psd_sqrt(spec.c_out) @ resid) ** 2))


def ordered_error(spec: TaskSetSpec, ordering: Ordering) -> float:
    return final_error(apply_ordering(spec, ordering))


def batched_final_error(c_in: np.ndarray, sqrt_out: np.ndarray) -> np.ndarray:
    """Final error for a stack of ``(n, P, P)`` input matrices.

    ``sqrt_out`` is either one ``(P, P)`` square root shared by every
    matrix or a matching ``(n, P, P)`` stack. Back-substitution runs
    row by row across the whole stack.
    """
    c_in = np.asarray(c_in, dtype=float)
    n, P, _ = c_in.shape
    u = np.triu(c_in, 1)
    ut = np.swapaxes(u, 1, 2)
    x = np.empty_like(ut)
    for i in range(P - 1, -1, -1):
        x[:, i, :] = ut[:, i, :] - np.einsum("nk,nkj->nj", u[:, i, i + 1:], x[:, i + 1:, :])
    y = np.matmul(sqrt_out, x)
    err = np.einsum("nij,nij->n", y, y)
    return np.where((err < 0) & (err >= -CLAMP_TOL), 0.0, err)


def per_task_mean(value: float, P: int) -> float:
    return value / P
