"""Correlation matrices, task sets, orderings and the ways to build them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import (
    EntryOutOfRange,
    NotPSD,
    NotSymmetric,
    NotUnitDiagonal,
    RejectionBudgetExhausted,
    SizeMismatch,
    TaskOrderError,
    UnsupportedSize,
)

TOL_PSD = 1e-10
TOL_ENTRY = 1e-12
DEFAULT_MAX_TRIES = 10_000
GRAPH_KINDS = ("chain", "ring", "tree", "leaves")

# candidates drawn per RNG call in the rejection sampler; part of the
# determinism contract, changing it changes every sampled matrix
_SAMPLER_BLOCK = 4096


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """A validated task-similarity matrix.

    Construct through :func:`validate_correlation`; the constructor itself
    trusts its input.
    """

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def off_diagonal(self) -> np.ndarray:
        """Strict upper-triangle entries in row-major order."""
        return self.entries[np.triu_indices(self.size, 1)]

    def __eq__(self, other):
        if not isinstance(other, CorrelationMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())


@dataclass(frozen=True)
class TaskSetSpec:
    """The analytic problem instance: input and output task similarity."""

    c_in: CorrelationMatrix
    c_out: CorrelationMatrix

    def __post_init__(self):
        if self.c_in.size != self.c_out.size:
            raise SizeMismatch(
                f"c_in is {self.c_in.size}x{self.c_in.size} but c_out is "
                f"{self.c_out.size}x{self.c_out.size}"
            )
        if self.c_in.size < 1:
            raise SizeMismatch("a task set needs at least one task")

    @property
    def P(self) -> int:
        return self.c_in.size

    @classmethod
    def uniform_output(cls, c_in: CorrelationMatrix, rho_o: float = 1.0) -> TaskSetSpec:
        return cls(c_in, constant_correlation(c_in.size, rho_o))


@dataclass(frozen=True)
class Ordering:
    """A training sequence; ``perm[k]`` is the (0-based) task trained k-th."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise TaskOrderError(f"not a permutation of 0..{len(perm) - 1}: {perm}")
        object.__setattr__(self, "perm", perm)

    def __len__(self):
        return len(self.perm)

    def __iter__(self):
        return iter(self.perm)

    @classmethod
    def identity(cls, P: int) -> Ordering:
        return cls(tuple(range(P)))

    @classmethod
    def parse(cls, text: str) -> Ordering:
        """Parse ``"3>1>2"`` (1-based) or ``"C>A>B"`` (letters)."""
        parts = [p.strip() for p in text.replace("→", ">").split(">") if p.strip()]
        if not parts:
            raise TaskOrderError(f"empty ordering: {text!r}")
        if all(p.isdigit() for p in parts):
            return cls(tuple(int(p) - 1 for p in parts))
        if all(len(p) == 1 and p.isalpha() for p in parts):
            return cls(tuple(ord(p.upper()) - ord("A") for p in parts))
        raise TaskOrderError(f"cannot parse ordering {text!r}")

    def reversed(self) -> Ordering:
        return Ordering(self.perm[::-1])

    def inverse(self) -> Ordering:
        inv = [0] * len(self.perm)
        for pos, task in enumerate(self.perm):
            inv[task] = pos
        return Ordering(tuple(inv))

    def __str__(self):
        return ">".join(str(i + 1) for i in self.perm)

    def letters(self) -> str:
        return ">".join(chr(ord("A") + i) for i in self.perm)


@dataclass(frozen=True)
class GraphSpec:
    """Graph-structured similarity: ``C[i, j] = a ** dist(i, j)``.

    For ``tree`` the size counts all nodes of a perfect binary tree
    (3, 7, 15, ...); for ``leaves`` it counts the leaves (2, 4, 8, ...).
    """

    kind: str
    size: int
    a: float

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise TaskOrderError(f"unknown graph kind {self.kind!r}; expected one of {GRAPH_KINDS}")
        if not 0.0 < self.a < 1.0:
            raise TaskOrderError(f"neighbour similarity a must lie in (0, 1), got {self.a}")
        if self.size < 1:
            raise UnsupportedSize(f"graph size must be positive, got {self.size}")


def validate_correlation(entries, tol_psd: float = TOL_PSD) -> CorrelationMatrix:
    """Check every correlation-matrix invariant and wrap the result.

    Raises
    ------
    NotSymmetric, NotUnitDiagonal, EntryOutOfRange, NotPSD
    """
    c = np.asarray(entries, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise SizeMismatch(f"correlation matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise EntryOutOfRange("matrix contains non-finite entries")
    if not np.array_equal(c, c.T):
        if not np.allclose(c, c.T, rtol=0.0, atol=TOL_ENTRY):
            i, j = np.unravel_index(np.argmax(np.abs(c - c.T)), c.shape)
            raise NotSymmetric(f"entries ({i}, {j}) and ({j}, {i}) differ: {c[i, j]} vs {c[j, i]}")
        c = 0.5 * (c + c.T)
    if np.any(np.abs(np.diag(c) - 1.0) > TOL_ENTRY):
        raise NotUnitDiagonal(f"diagonal must be 1, got {np.diag(c)}")
    np.fill_diagonal(c, 1.0)
    if np.any(np.abs(c) > 1.0 + TOL_ENTRY):
        raise EntryOutOfRange(f"entry of magnitude {np.abs(c).max()} outside [-1, 1]")
    c = np.clip(c, -1.0, 1.0)
    lam_min = np.linalg.eigvalsh(c)[0] if c.size else 0.0
    if lam_min < -tol_psd:
        raise NotPSD(lam_min, tol_psd)
    return CorrelationMatrix(c)


def constant_correlation(P: int, value: float) -> CorrelationMatrix:
    """All off-diagonals equal to ``value``."""
    c = np.full((P, P), float(value))
    np.fill_diagonal(c, 1.0)
    return validate_correlation(c)


def three_task_correlation(rho_ab: float, rho_bc: float, rho_ca: float) -> np.ndarray:
    """Raw (unvalidated) three-task matrix in A, B, C order."""
    return np.array(
        [[1.0, rho_ab, rho_ca],
         [rho_ab, 1.0, rho_bc],
         [rho_ca, rho_bc, 1.0]]
    )


def _tree_depth(n: int, leaves: bool) -> int:
    # perfect binary tree: 2**(d+1) - 1 nodes, 2**d leaves
    count = n if leaves else n + 1
    d = count.bit_length() - 1
    if count != 1 << d or (d < 1 if leaves else d < 2):
        what = "leaf count" if leaves else "node count"
        raise UnsupportedSize(f"{what} {n} does not match a perfect binary tree")
    return d if leaves else d - 1


def graph_distances(spec: GraphSpec) -> np.ndarray:
    """Unweighted shortest-path distances between the tasks of ``spec``."""
    P = spec.size
    idx = np.arange(P)
    if spec.kind == "chain":
        return np.abs(idx[:, None] - idx[None, :]).astype(float)
    if spec.kind == "ring":
        d = np.abs(idx[:, None] - idx[None, :])
        return np.minimum(d, P - d).astype(float)

    depth = _tree_depth(P, leaves=spec.kind == "leaves")
    n_nodes = 2 ** (depth + 1) - 1
    # heap layout: node k has children 2k+1 and 2k+2
    parents = np.arange(1, n_nodes)
    adj = csr_matrix(
        (np.ones(n_nodes - 1), ((parents - 1) // 2, parents)), shape=(n_nodes, n_nodes)
    )
    dist = shortest_path(adj, directed=False, unweighted=True)
    if spec.kind == "leaves":
        first_leaf = 2 ** depth - 1
        dist = dist[first_leaf:, first_leaf:]
    return dist


def graph_similarity(spec: GraphSpec) -> CorrelationMatrix:
    """Similarity matrix ``a ** D`` for chain, ring, tree or tree-leaves graphs."""
    return validate_correlation(spec.a ** graph_distances(spec))


def _triples_psd(cands: np.ndarray, P: int) -> np.ndarray:
    """Necessary PSD test on every 3x3 principal minor, vectorised.

    By interlacing, a 3x3 principal submatrix has smallest eigenvalue no
    smaller than the full matrix, and for a unit-diagonal 3x3 matrix
    ``det >= lam_min * 9`` once ``lam_min`` is the only negative eigenvalue.
    Rejecting ``det < -9 * TOL_PSD`` therefore never discards a matrix the
    exact eigenvalue test would accept.
    """
    ok = np.ones(len(cands), dtype=bool)
    for i, j, k in itertools.combinations(range(P), 3):
        a, b, c = cands[:, i, j], cands[:, j, k], cands[:, i, k]
        det = 1.0 + 2.0 * a * b * c - a * a - b * b - c * c
        ok &= det >= -9.0 * TOL_PSD
    return ok


def _sample_correlation_counted(
    P: int, lo: float, hi: float, seed, max_tries: int
) -> tuple[CorrelationMatrix, int]:
    if P < 1:
        raise UnsupportedSize(f"P must be positive, got {P}")
    if not -1.0 <= lo < hi <= 1.0:
        raise TaskOrderError(f"need -1 <= lo < hi <= 1, got lo={lo}, hi={hi}")
    if max_tries < 1:
        raise TaskOrderError("max_tries must be at least 1")
    if P == 1:
        return CorrelationMatrix(np.ones((1, 1))), 1

    rng = np.random.default_rng(seed)
    iu = np.triu_indices(P, 1)
    tried = 0
    while tried < max_tries:
        n = min(_SAMPLER_BLOCK, max_tries - tried)
        draws = rng.uniform(lo, hi, size=(n, len(iu[0])))
        cands = np.broadcast_to(np.eye(P), (n, P, P)).copy()
        cands[:, iu[0], iu[1]] = draws
        cands[:, iu[1], iu[0]] = draws
        survivors = np.flatnonzero(_triples_psd(cands, P)) if P >= 3 else np.arange(n)
        if survivors.size:
            lam = np.linalg.eigvalsh(cands[survivors])[:, 0]
            hits = survivors[lam >= -TOL_PSD]
            if hits.size:
                first = hits[0]
                return CorrelationMatrix(cands[first]), tried + first + 1
        tried += n
    raise RejectionBudgetExhausted(
        f"no PSD matrix among {max_tries} candidates (P={P}, range [{lo}, {hi}])"
    )


def sample_correlation(
    P: int,
    lo: float = 0.0,
    hi: float = 1.0,
    seed=0,
    max_tries: int = DEFAULT_MAX_TRIES,
) -> CorrelationMatrix:
    """Rejection-sample a random correlation matrix.

    Strict upper-triangle entries are i.i.d. uniform on ``[lo, hi]``; the
    symmetrised, unit-diagonal candidate is accepted once its smallest
    eigenvalue is at least ``-1e-10``. Candidates are drawn in fixed-size
    blocks from a single generator, so the result depends only on the
    arguments.
    """
    return _sample_correlation_counted(P, lo, hi, seed, max_tries)[0]


def sample_correlation_tries(P, lo=0.0, hi=1.0, seed=0, max_tries=DEFAULT_MAX_TRIES):
    """Like :func:`sample_correlation` but also returns the number of candidates drawn."""
    return _sample_correlation_counted(P, lo, hi, seed, max_tries)


def apply_ordering(spec: TaskSetSpec, ordering: Ordering) -> TaskSetSpec:
    """Re-index both similarity matrices by training position."""
    if len(ordering) != spec.P:
        raise SizeMismatch(f"ordering has {len(ordering)} tasks, spec has {spec.P}")
    p = np.asarray(ordering.perm)
    return TaskSetSpec(
        CorrelationMatrix(spec.c_in.entries[np.ix_(p, p)]),
        CorrelationMatrix(spec.c_out.entries[np.ix_(p, p)]),
    )


def all_orderings(P: int) -> Iterable[Ordering]:
    """Every ordering of ``P`` tasks, in lexicographic order."""
    return (Ordering(p) for p in itertools.permutations(range(P)))


def as_correlation(c: CorrelationMatrix | Sequence | np.ndarray) -> CorrelationMatrix:
    return c if isinstance(c, CorrelationMatrix) else validate_correlation(c)
