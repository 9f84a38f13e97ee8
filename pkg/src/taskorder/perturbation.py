"""First-order sensitivity of the final error to pairwise input similarity.

Around a uniform baseline (all input correlations ``m``, all output
correlations ``rho_o``) the error moves linearly with the residual
similarities ``dM``::

    eps(C_in) ~= eps(m, rho_o) + sum_{mu < nu} G[mu, nu] * dM[mu, nu]

``G`` is assembled from three scalar profiles: ``g_o`` (absolute
position of each task), ``g_plus`` (sum of positions) and ``g_minus``
(gap between positions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analytic import final_error
from .errors import MOutOfRange, SizeMismatch
from .taskspec import (
    CorrelationMatrix,
    Ordering,
    TaskSetSpec,
    constant_correlation,
    validate_correlation,
)

# dM[mu, nu] enters C_in at both (mu, nu) and (nu, mu). The g-profile sum
# is the derivative along one of those entries; G is the derivative along
# the symmetric direction, i.e. twice that.
SYMMETRIC_PAIR_FACTOR = 2.0


@dataclass(frozen=True, eq=False)
class PerturbationSpec:
    P: int
    m: float
    rho_o: float
    delta_m: np.ndarray

    def c_in(self) -> CorrelationMatrix:
        c = self.m + self.delta_m
        np.fill_diagonal(c, 1.0)
        return validate_correlation(c)

    def spec(self) -> TaskSetSpec:
        return TaskSetSpec.uniform_output(self.c_in(), self.rho_o)


@dataclass(frozen=True, eq=False)
class GCoefficients:
    """Linear sensitivities at a uniform baseline.

    ``G``, ``g_plus_part`` and ``g_minus_part`` are strictly upper
    triangular. The split into ``g_plus_part`` (position-sum dependence)
    and ``g_minus_part`` (gap dependence) is the ``rho_o = 1`` form; at
    other ``rho_o`` the two parts do not add up to ``G``.
    """

    P: int
    m: float
    rho_o: float
    G: np.ndarray
    g_plus_part: np.ndarray
    g_minus_part: np.ndarray
    alpha_plus: float
    alpha_minus: float


def _check_m(m: float):
    if not -1.0 < m < 1.0:
        raise MOutOfRange(f"m must lie in (-1, 1), got {m}")


def decompose(c, rho_o: float = 1.0) -> PerturbationSpec:
    """Split ``C_in`` into its mean off-diagonal ``m`` and residual ``dM``."""
    entries = c.entries if isinstance(c, CorrelationMatrix) else np.asarray(c, dtype=float)
    P = entries.shape[0]
    if P < 2:
        raise SizeMismatch("decomposition needs at least two tasks")
    iu = np.triu_indices(P, 1)
    m = float(entries[iu].mean())
    delta = entries - m
    np.fill_diagonal(delta, 0.0)
    return PerturbationSpec(P, m, float(rho_o), delta)


def alpha_plus(m: float, P: int) -> float:
    return (2 - m) / (3 - m) * (1 - m) ** P


def alpha_minus(m: float, P: int) -> float:
    q = 1 - m
    return -1 + q ** P * (m * P / q + (3 - m) / (2 - m))


def _coefs(m, rho_o):
    c = (1 - rho_o) * m / (2 - m)
    return c, rho_o - c


def g_o(k, m: float, rho_o: float, P: int):
    q = 1 - m
    c, b = _coefs(m, rho_o)
    k = np.asarray(k, dtype=float)
    return c * q ** (P - k) - b * q ** (P + k - 1)


def g_plus(s, m: float, rho_o: float, P: int):
    q = 1 - m
    c, b = _coefs(m, rho_o)
    s = np.asarray(s, dtype=float)
    tail = P * m + 2 * q - q ** 2 / (2 - m)
    return b * (3 - m) / (2 - m) * q ** (s - 1) - c * tail * q ** (2 * P - s)


def g_minus(d, m: float, rho_o: float, P: int):
    q = 1 - m
    c, b = _coefs(m, rho_o)
    d = np.asarray(d, dtype=float)
    lead = b * -alpha_minus(m, P) - c / q
    return c / (2 - m) * q ** (d - 1) - lead * q ** (P - d)


def _pair_grid(P):
    mu, nu = np.indices((P, P)) + 1
    return mu, nu, nu > mu


def g_functions(m: float, rho_o: float, P: int) -> GCoefficients:
    """Sensitivity matrix ``G`` and its ``rho_o = 1`` decomposition.

    ``G[mu, nu]`` (0-based storage, 1-based positions in the formulas) is
    the derivative of the final error with respect to the symmetric pair
    of input correlations at training positions ``mu < nu``.
    """
    _check_m(m)
    if P < 2:
        raise SizeMismatch("sensitivities need at least two tasks")
    mu, nu, upper = _pair_grid(P)
    raw = g_o(mu, m, rho_o, P) + g_o(nu, m, rho_o, P) + g_plus(mu + nu, m, rho_o, P) + g_minus(nu - mu, m, rho_o, P)
    G = np.where(upper, SYMMETRIC_PAIR_FACTOR * raw, 0.0)

    q = 1 - m
    plus = -q ** (P + mu - 1) - q ** (P + nu - 1) + (3 - m) / (2 - m) * q ** (mu + nu - 1)
    minus = alpha_minus(m, P) * q ** (P - (nu - mu))
    return GCoefficients(
        P=P,
        m=float(m),
        rho_o=float(rho_o),
        G=G,
        g_plus_part=np.where(upper, SYMMETRIC_PAIR_FACTOR * plus, 0.0),
        g_minus_part=np.where(upper, SYMMETRIC_PAIR_FACTOR * minus, 0.0),
        alpha_plus=alpha_plus(m, P),
        alpha_minus=alpha_minus(m, P),
    )


def g_plus_mean_form(m: float, P: int) -> np.ndarray:
    """``g_plus_part`` rewritten around the mean decay ``gbar = mean_k (1-m)^k``.

    Separates a term linear in each task's own decay factor (which the
    typicality ordering controls) from a centred pair interaction.
    """
    _check_m(m)
    q = 1 - m
    mu, nu, upper = _pair_grid(P)
    gbar = np.mean(q ** np.arange(1, P + 1))
    kappa = (3 - m) / ((2 - m) * q)
    x, y = q ** mu, q ** nu
    form = (
        (kappa * gbar - q ** (P - 1)) * (x + y)
        + kappa * (x - gbar) * (y - gbar)
        - kappa * gbar ** 2
    )
    return np.where(upper, SYMMETRIC_PAIR_FACTOR * form, 0.0)


def g_plus_alpha_form(m: float, P: int) -> np.ndarray:
    """``g_plus_part`` factored around ``alpha_plus``; shows monotonicity for 0 < m < 1."""
    _check_m(m)
    q = 1 - m
    mu, nu, upper = _pair_grid(P)
    ap = alpha_plus(m, P)
    kappa = (3 - m) / ((2 - m) * q)
    form = kappa * (q ** mu - ap) * (q ** nu - ap) - ap * q ** (P - 1)
    return np.where(upper, SYMMETRIC_PAIR_FACTOR * form, 0.0)


def baseline_error(m: float, rho_o: float, P: int) -> float:
    """Error of the unperturbed uniform task set; order independent."""
    _check_m(m)
    return final_error(TaskSetSpec(constant_correlation(P, m), constant_correlation(P, rho_o)))


def linearized_error(pert: PerturbationSpec) -> float:
    coef = g_functions(pert.m, pert.rho_o, pert.P)
    return baseline_error(pert.m, pert.rho_o, pert.P) + float(np.sum(coef.G * np.triu(pert.delta_m, 1)))


def delta_eps_plus(pert: PerturbationSpec) -> float:
    """Position-sum (typicality) part of the first-order correction, rho_o = 1 form."""
    coef = g_functions(pert.m, 1.0, pert.P)
    return float(np.sum(coef.g_plus_part * np.triu(pert.delta_m, 1)))


def delta_eps_minus(pert: PerturbationSpec) -> float:
    """Gap (path) part of the first-order correction, rho_o = 1 form."""
    coef = g_functions(pert.m, 1.0, pert.P)
    return float(np.sum(coef.g_minus_part * np.triu(pert.delta_m, 1)))


def delta_eps_minus_by_gap(pert: PerturbationSpec) -> float:
    """``delta_eps_minus`` summed diagonal by diagonal of ``dM``."""
    P, m = pert.P, pert.m
    total = 0.0
    for d in range(1, P):
        total += (1 - m) ** (P - d) * np.trace(pert.delta_m, offset=d)
    return SYMMETRIC_PAIR_FACTOR * alpha_minus(m, P) * total


def typicality(c) -> np.ndarray:
    """Residual similarity of each task to all others (column sums of ``dM``)."""
    return decompose(c).delta_m.sum(axis=0)


def hamiltonian_length(c, ordering: Ordering) -> float:
    """Summed dissimilarity ``1 - C`` between consecutively trained tasks."""
    entries = c.entries if isinstance(c, CorrelationMatrix) else np.asarray(c, dtype=float)
    if len(ordering) != entries.shape[0]:
        raise SizeMismatch(f"ordering has {len(ordering)} tasks, matrix has {entries.shape[0]}")
    p = ordering.perm
    return float(sum(1.0 - entries[p[k], p[k + 1]] for k in range(len(p) - 1)))


def finite_difference_G(m: float, rho_o: float, P: int, h: float = 1e-5) -> np.ndarray:
    """Central-difference estimate of ``G`` from the closed-form error."""
    base = np.full((P, P), m)
    np.fill_diagonal(base, 1.0)
    out_c = constant_correlation(P, rho_o)
    G = np.zeros((P, P))
    for i in range(P):
        for j in range(i + 1, P):
            vals = []
            for step in (h, -h):
                c = base.copy()
                c[i, j] += step
                c[j, i] += step
                vals.append(final_error(TaskSetSpec(CorrelationMatrix(c), out_c)))
            G[i, j] = (vals[0] - vals[1]) / (2 * h)
    return G
