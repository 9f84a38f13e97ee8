"""Task orderings: exhaustive optimum, ordering rules and random baselines."""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import batched_final_error, ordered_error, psd_sqrt
from .errors import TaskOrderError, TooManyTasks
from .perturbation import decompose, hamiltonian_length, typicality
from .taskspec import CorrelationMatrix, Ordering, TaskSetSpec

DEFAULT_LIMIT_P = 10
MAX_PATH_P = 16
DEFAULT_N_RANDOM = 30
PERIPHERY_TO_CORE = "periphery_to_core"
CORE_TO_PERIPHERY = "core_to_periphery"

_CHUNK = 20_000
# relative tolerance for treating two path lengths or typicalities as equal
_TIE_TOL = 1e-12


def spec_digest(spec: TaskSetSpec) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(spec.c_in.entries).tobytes())
    h.update(np.ascontiguousarray(spec.c_out.entries).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class RankedOrders:
    orders: list[tuple[Ordering, float]]
    spec_digest: str

    @property
    def best(self) -> tuple[Ordering, float]:
        return self.orders[0]

    @property
    def worst(self) -> tuple[Ordering, float]:
        return self.orders[-1]

    def rank_of(self, ordering: Ordering) -> int:
        """0-based position of ``ordering`` in the ascending list."""
        for k, (o, _) in enumerate(self.orders):
            if o == ordering:
                return k
        raise KeyError(str(ordering))

    def error_of(self, ordering: Ordering) -> float:
        return self.orders[self.rank_of(ordering)][1]

    def to_dict(self) -> dict:
        return {
            "spec_digest": self.spec_digest,
            "orders": [{"order": str(o), "error": e} for o, e in self.orders],
        }


def _permutation_errors(spec: TaskSetSpec, perms: np.ndarray) -> np.ndarray:
    c_in = spec.c_in.entries
    s_out = psd_sqrt(spec.c_out)
    shared = _is_uniform_offdiag(spec.c_out)
    out = np.empty(len(perms))
    for start in range(0, len(perms), _CHUNK):
        p = perms[start:start + _CHUNK]
        rows, cols = p[:, :, None], p[:, None, :]
        # uniform off-diagonals make C_out, hence its root, permutation invariant
        sq = s_out if shared else s_out[rows, cols]
        out[start:start + len(p)] = batched_final_error(c_in[rows, cols], sq)
    return out


def _is_uniform_offdiag(c: CorrelationMatrix) -> bool:
    P = c.size
    if P < 2:
        return True
    off = c.off_diagonal()
    return bool(np.all(off == off[0]))


def enumerate_orders(spec: TaskSetSpec, limit_p: int = DEFAULT_LIMIT_P) -> RankedOrders:
    """Analytic error of every ordering, ascending; exact ties keep lexicographic order."""
    if spec.P > limit_p:
        raise TooManyTasks(f"{spec.P}! orderings exceeds the enumeration limit P <= {limit_p}")
    perms = np.array(list(itertools.permutations(range(spec.P))), dtype=np.intp).reshape(-1, spec.P)
    errors = _permutation_errors(spec, perms)
    idx = np.argsort(errors, kind="stable")
    return RankedOrders(
        [(Ordering(tuple(perms[k])), float(errors[k])) for k in idx],
        spec_digest(spec),
    )


def typicality_order(c, direction: str = PERIPHERY_TO_CORE) -> Ordering:
    """Sort tasks by typicality; ties go to the lower task index."""
    # round so sums that differ only by summation order tie
    t = np.round(typicality(c), 10)
    if direction == PERIPHERY_TO_CORE:
        key = t
    elif direction == CORE_TO_PERIPHERY:
        key = -t
    else:
        raise TaskOrderError(f"unknown direction {direction!r}")
    return Ordering(tuple(int(i) for i in np.argsort(key, kind="stable")))


@dataclass(frozen=True)
class HamiltonianPath:
    """An extremal Hamiltonian path on the dissimilarity graph ``1 - C``.

    ``n_optimal`` counts directed optimal paths, so a unique path and its
    reversal give 2.
    """

    ordering: Ordering
    length: float
    n_optimal: int

    @property
    def twin(self) -> Ordering:
        return self.ordering.reversed()


def hamiltonian_optimum(c, objective: str = "max") -> HamiltonianPath:
    """Exact extremal Hamiltonian path by dynamic programming over subsets.

    ``best[mask, v]`` is the best length still obtainable when the tasks in
    ``mask`` have been visited and ``v`` is the current one. Reconstruction
    walks forward choosing the lowest-index task that keeps the optimum, so
    the returned order is the lexicographically smallest optimal one.
    """
    entries = c.entries if isinstance(c, CorrelationMatrix) else np.asarray(c, dtype=float)
    P = entries.shape[0]
    if P > MAX_PATH_P:
        raise TooManyTasks(f"exact path search supports P <= {MAX_PATH_P}, got {P}")
    if objective not in ("max", "min"):
        raise TaskOrderError(f"objective must be 'max' or 'min', got {objective!r}")
    if P == 1:
        return HamiltonianPath(Ordering((0,)), 0.0, 1)

    sign = 1.0 if objective == "max" else -1.0
    d = sign * (1.0 - entries)
    full = (1 << P) - 1
    tol = _TIE_TOL * max(1.0, float(np.abs(d).max()) * P)

    best = np.full((1 << P, P), -np.inf)
    count = np.zeros((1 << P, P), dtype=np.int64)
    best[full, :] = 0.0
    count[full, :] = 1
    bits = [1 << v for v in range(P)]
    for mask in range(full - 1, 0, -1):
        members = np.array([v for v in range(P) if mask & bits[v]])
        acc = np.full(len(members), -np.inf)
        cnt = np.zeros(len(members), dtype=np.int64)
        for n in range(P):
            if mask & bits[n]:
                continue
            cand = d[members, n] + best[mask | bits[n], n]
            better = cand > acc + tol
            same = np.abs(cand - acc) <= tol
            cnt = np.where(better, count[mask | bits[n], n], np.where(same, cnt + count[mask | bits[n], n], cnt))
            acc = np.where(better, cand, acc)
        best[mask, members] = acc
        count[mask, members] = cnt

    starts = np.array([best[bits[v], v] for v in range(P)])
    opt = starts.max()
    start_ok = np.abs(starts - opt) <= tol
    n_opt = int(sum(count[bits[v], v] for v in range(P) if start_ok[v]))

    path = [int(np.flatnonzero(start_ok)[0])]
    mask = bits[path[0]]
    while mask != full:
        cur = path[-1]
        target = best[mask, cur]
        for n in range(P):
            if not mask & bits[n] and abs(d[cur, n] + best[mask | bits[n], n] - target) <= tol:
                path.append(n)
                mask |= bits[n]
                break
    ordering = Ordering(tuple(path))
    return HamiltonianPath(ordering, hamiltonian_length(entries, ordering), n_opt)


def extremal_path(c, objective: str = "max") -> Ordering:
    """Ordering along the longest (``max``) or shortest (``min``) Hamiltonian path."""
    return hamiltonian_optimum(c, objective).ordering


def random_orderings(P: int, n: int, seed=0) -> list[Ordering]:
    if n < 1:
        raise TaskOrderError("n must be at least 1")
    rng = np.random.default_rng(seed)
    return [Ordering(tuple(int(i) for i in rng.permutation(P))) for _ in range(n)]


@dataclass(frozen=True)
class RuleEntry:
    rule: str
    ordering: Ordering
    error: float
    twin: Ordering | None = None
    twin_error: float | None = None
    n_optimal: int | None = None

    def to_dict(self) -> dict:
        d = {"rule": self.rule, "order": str(self.ordering), "error": self.error}
        if self.twin is not None:
            d.update(twin=str(self.twin), twin_error=self.twin_error, n_optimal=self.n_optimal)
        return d


@dataclass(frozen=True)
class RuleReport:
    entries: list[RuleEntry]
    random_mean: float
    random_sem: float
    n_random: int
    m: float
    spec_digest: str
    random_errors: list[float] = field(default_factory=list, repr=False)

    def __getitem__(self, rule: str) -> RuleEntry:
        for e in self.entries:
            if e.rule == rule:
                return e
        raise KeyError(rule)

    def error(self, rule: str) -> float:
        return self[rule].error

    def to_dict(self) -> dict:
        return {
            "spec_digest": self.spec_digest,
            "m": self.m,
            "rules": [e.to_dict() for e in self.entries],
            "random": {"mean": self.random_mean, "sem": self.random_sem, "n": self.n_random},
        }


def _path_entry(spec: TaskSetSpec, rule: str, objective: str) -> RuleEntry:
    hp = hamiltonian_optimum(spec.c_in, objective)
    e1 = ordered_error(spec, hp.ordering)
    e2 = ordered_error(spec, hp.twin)
    return RuleEntry(rule, hp.ordering, 0.5 * (e1 + e2), hp.twin, e2, hp.n_optimal)


def compare_rules(spec: TaskSetSpec, n_random: int = DEFAULT_N_RANDOM, seed=0) -> RuleReport:
    """Analytic error of each ordering rule next to a random-order baseline.

    Path rules report the mean over the optimal order and its reversal.
    """
    if spec.P > MAX_PATH_P:
        raise TooManyTasks(f"rule comparison supports P <= {MAX_PATH_P}, got {spec.P}")
    entries = []
    for rule in (PERIPHERY_TO_CORE, CORE_TO_PERIPHERY):
        o = typicality_order(spec.c_in, rule)
        entries.append(RuleEntry(rule, o, ordered_error(spec, o)))
    entries.append(_path_entry(spec, "max_path", "max"))
    entries.append(_path_entry(spec, "min_path", "min"))

    rand = [ordered_error(spec, o) for o in random_orderings(spec.P, n_random, seed)]
    sem = float(np.std(rand, ddof=1) / math.sqrt(len(rand))) if len(rand) > 1 else 0.0
    m = decompose(spec.c_in).m if spec.P > 1 else 0.0
    return RuleReport(entries, float(np.mean(rand)), sem, n_random, m, spec_digest(spec), rand)
