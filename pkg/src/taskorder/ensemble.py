"""Monte Carlo teacher ensembles and sequential training of a linear student.

Task ``mu`` maps a latent ``s ~ N(0, I)`` to input ``A_mu s`` and target
``B_mu s``. Corresponding entries of ``A_1..A_P`` are jointly Gaussian with
covariance ``C_in / n_s`` (``C_out / n_s`` for the ``B``), so the population
loss of a student ``W`` on task ``mu`` is ``||B_mu - W A_mu||_F^2 / n_y``
and no data ever has to be drawn.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analytic import psd_sqrt
from .errors import Diverged, IndexOutOfRange, RankDeficient, SizeMismatch, TaskOrderError
from .taskspec import Ordering, TaskSetSpec

RANK_RTOL = 1e-10
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class Dimensions:
    n_s: int = 30
    n_x: int = 3000
    n_y: int = 10

    def __post_init__(self):
        if self.n_s < 1 or self.n_y < 1:
            raise TaskOrderError(f"n_s and n_y must be positive, got {self}")
        if self.n_x < self.n_s:
            raise TaskOrderError(f"n_x ({self.n_x}) must be at least n_s ({self.n_s})")

    @property
    def gamma(self) -> float:
        return self.n_s / self.n_x


@dataclass(frozen=True)
class TrainingConfig:
    eta: float = 1e-3
    iters_per_task: int = 100

    def __post_init__(self):
        if not self.eta > 0:
            raise TaskOrderError(f"learning rate must be positive, got {self.eta}")
        if self.iters_per_task < 1:
            raise TaskOrderError(f"iters_per_task must be at least 1, got {self.iters_per_task}")


@dataclass(frozen=True, eq=False)
class EnsembleSample:
    dims: Dimensions
    a_mats: np.ndarray  # (P, n_x, n_s)
    b_mats: np.ndarray  # (P, n_y, n_s)
    seed: int

    @property
    def P(self) -> int:
        return self.a_mats.shape[0]


@dataclass(frozen=True, eq=False)
class StudentState:
    """Trained weights plus the error on every task after every stage.

    ``stage_errors[k, mu]`` is the error on task ``mu`` (original index)
    after ``k`` tasks have been trained; row 0 is the zero initialisation.
    """

    w: np.ndarray
    stage_errors: np.ndarray
    ordering: Ordering

    @property
    def final_error(self) -> float:
        return float(self.stage_errors[-1].sum())

    def stage_totals(self) -> np.ndarray:
        return self.stage_errors.sum(axis=1)

    def learned_mean(self) -> np.ndarray:
        """Mean error over the tasks trained so far, after stages 1..P."""
        p = list(self.ordering.perm)
        return np.array([self.stage_errors[k, p[:k]].mean() for k in range(1, len(p) + 1)])


def sample_ensemble(spec: TaskSetSpec, dims: Dimensions = Dimensions(), seed=0) -> EnsembleSample:
    """Draw mixing matrices whose cross-task entry correlations follow ``spec``."""
    rng = np.random.default_rng(seed)
    s_in = psd_sqrt(spec.c_in)
    s_out = psd_sqrt(spec.c_out)
    P = spec.P
    z_a = rng.standard_normal((P, dims.n_x, dims.n_s))
    z_b = rng.standard_normal((P, dims.n_y, dims.n_s))
    scale = 1.0 / math.sqrt(dims.n_s)
    a = np.tensordot(s_in, z_a, axes=(1, 0)) * scale
    b = np.tensordot(s_out, z_b, axes=(1, 0)) * scale
    return EnsembleSample(dims, a, b, int(seed) if np.isscalar(seed) else -1)


def _check_index(sample: EnsembleSample, mu: int):
    if not 0 <= mu < sample.P:
        raise IndexOutOfRange(f"task index {mu} outside 0..{sample.P - 1}")


def task_error(w: np.ndarray, sample: EnsembleSample, mu: int) -> float:
    """Population mean-squared error ``||B_mu - W A_mu||_F^2 / n_y``."""
    _check_index(sample, mu)
    r = sample.b_mats[mu] - w @ sample.a_mats[mu]
    return float(np.sum(r * r)) / sample.dims.n_y


def all_task_errors(w: np.ndarray, sample: EnsembleSample) -> np.ndarray:
    r = sample.b_mats - np.matmul(w, sample.a_mats)
    return np.einsum("pij,pij->p", r, r) / sample.dims.n_y


def _check_ordering(sample, ordering):
    if len(ordering) != sample.P:
        raise SizeMismatch(f"ordering has {len(ordering)} tasks, sample has {sample.P}")


def train_closed(sample: EnsembleSample, ordering: Ordering) -> StudentState:
    """Train each task to convergence with the exact projected update.

    Converged gradient flow from ``W`` on task ``mu`` only changes ``W`` in
    the column space of ``A_mu``: ``W <- W (I - U U^T) + B_mu A_mu^+``.
    """
    _check_ordering(sample, ordering)
    dims = sample.dims
    w = np.zeros((dims.n_y, dims.n_x))
    stages = [all_task_errors(w, sample)]
    for mu in ordering:
        u, s, vt = np.linalg.svd(sample.a_mats[mu], full_matrices=False)
        if s[-1] < RANK_RTOL * s[0]:
            raise RankDeficient(f"A_{mu} is rank deficient: singular values {s[-1]:.3e} / {s[0]:.3e}")
        pinv = (vt.T / s) @ u.T
        w = w - (w @ u) @ u.T + sample.b_mats[mu] @ pinv
        stages.append(all_task_errors(w, sample))
    return StudentState(w, np.array(stages), ordering)


def train_gd(sample: EnsembleSample, ordering: Ordering, cfg: TrainingConfig = TrainingConfig()) -> StudentState:
    """Full-batch gradient descent, ``iters_per_task`` steps per task from zero.

    Steps descend the un-normalised squared residual ``||B - W A||_F^2``:
    ``W <- W + 2 eta (B - W A) A^T``. Reported errors keep the ``1 / n_y``
    normalisation.
    """
    _check_ordering(sample, ordering)
    dims = sample.dims
    w = np.zeros((dims.n_y, dims.n_x))
    stages = [all_task_errors(w, sample)]
    limit = DIVERGENCE_LIMIT * dims.n_y
    for mu in ordering:
        a, b = sample.a_mats[mu], sample.b_mats[mu]
        for it in range(cfg.iters_per_task):
            r = b - w @ a
            sq = float(np.sum(r * r))
            if not sq <= limit:
                raise Diverged(
                    f"task {mu} error {sq / dims.n_y:.3e} exceeds {DIVERGENCE_LIMIT:g} "
                    f"at iteration {it} (eta={cfg.eta})"
                )
            w = w + (2.0 * cfg.eta) * (r @ a.T)
        stages.append(all_task_errors(w, sample))
        if not np.all(stages[-1] <= DIVERGENCE_LIMIT):
            raise Diverged(f"task errors exceed {DIVERGENCE_LIMIT:g} after training task {mu}")
    return StudentState(w, np.array(stages), ordering)


def _train(sample, ordering, trainer, cfg):
    if trainer == "closed":
        return train_closed(sample, ordering)
    if trainer == "gd":
        return train_gd(sample, ordering, cfg or TrainingConfig())
    raise TaskOrderError(f"unknown trainer {trainer!r}; expected 'closed' or 'gd'")


def seed_stream(seed: int, n: int) -> list[int]:
    """``n`` independent integer seeds derived from ``seed``."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n, dtype=np.uint32)]


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    sem: float
    values: list[float] = field(repr=False)
    seeds: list[int] = field(repr=False)

    def __iter__(self):
        return iter((self.mean, self.sem))


def mc_final_error(
    spec: TaskSetSpec,
    dims: Dimensions = Dimensions(),
    ordering: Ordering | None = None,
    n_seeds: int = 10,
    cfg: TrainingConfig | None = None,
    trainer: str = "closed",
    seed: int = 0,
    workers: int = 1,
) -> MonteCarloResult:
    """Mean and standard error of the final summed error over ensemble draws.

    Each repetition uses its own derived seed, so results do not depend on
    ``workers``.
    """
    if n_seeds < 2:
        raise TaskOrderError("need at least two seeds for a standard error")
    ordering = ordering or Ordering.identity(spec.P)
    seeds = seed_stream(seed, n_seeds)

    def one(s):
        return _train(sample_ensemble(spec, dims, s), ordering, trainer, cfg).final_error

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, seeds))
    else:
        values = [one(s) for s in seeds]
    v = np.asarray(values)
    return MonteCarloResult(float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))), values, seeds)


def projector_deviation(sample: EnsembleSample, mu: int) -> float:
    """Relative gap between ``U U^T`` and ``gamma A A^T`` for task ``mu``.

    With ``A = U diag(s) V^T`` both matrices share the basis ``U``, so
    ``||U U^T - gamma A A^T||_F^2 = sum_i (1 - gamma s_i^2)^2`` and nothing
    of size ``n_x x n_x`` is formed.
    """
    _check_index(sample, mu)
    s = np.linalg.svd(sample.a_mats[mu], compute_uv=False)
    rank = int(np.sum(s > RANK_RTOL * s[0]))
    dev = np.sum((1.0 - sample.dims.gamma * s[:rank] ** 2) ** 2)
    return float(math.sqrt(dev / rank))


def trace_rows(state: StudentState, seed: int | None = None) -> list[dict]:
    """Stage-error table rows: ``stage, task, error`` (plus ``seed``)."""
    rows = []
    for stage, errs in enumerate(state.stage_errors):
        for task, e in enumerate(errs):
            row = {"stage": stage, "task": task + 1, "error": float(e)}
            if seed is not None:
                row = {"seed": seed, **row}
            rows.append(row)
    return rows
