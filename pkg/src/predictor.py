"""Mixture universal predictor over count classes, plus add-beta extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from src.family import SUM_TOLERANCE, ParamGrid, SuffStat, count_classes, log_count_weights
from src.workers import map_blocks

SINGULAR_TOLERANCE = 1e-9


# ── Data classes ──────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class Prior:
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("prior weights must be a non-empty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("prior weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"prior weights must sum to 1, got {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, size: int) -> Prior:
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point_mass(cls, size: int, index: int) -> Prior:
        w = np.zeros(size)
        w[index] = 1.0
        return cls(w)

    @classmethod
    def normalized(cls, unnormalized: np.ndarray) -> Prior:
        u = np.asarray(unnormalized, dtype=float)
        total = u.sum()
        if not total > 0:
            raise ValueError("cannot normalize an all-zero weight vector")
        return cls(u / total)

    def __len__(self) -> int:
        return self.weights.size

    def check_aligned(self, grid: ParamGrid) -> None:
        if len(self) != len(grid):
            raise ValueError(f"prior has {len(self)} weights but grid has {len(grid)} points")


@dataclass(frozen=True, eq=False)
class PredictiveTable:
    """Q(y | count class) for every class of a fixed history length.

    Flagged rows have zero mixture marginal; they hold a uniform placeholder
    and are skipped by every divergence sum.
    """

    horizon: int
    classes: np.ndarray
    probs: np.ndarray
    flagged: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float, copy=True)
        flagged = np.array(self.flagged, dtype=bool, copy=True)
        if probs.shape != np.shape(self.classes):
            raise ValueError("table probabilities must align with its count classes")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("table entries must lie in [0, 1]")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > SUM_TOLERANCE):
            raise ValueError("every table row must sum to 1")
        probs.setflags(write=False)
        flagged.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "flagged", flagged)

    @classmethod
    def from_rule(cls, horizon: int, q1: np.ndarray) -> PredictiveTable:
        """Binary table from Q(1 | k), k = 0..horizon."""
        q1 = np.asarray(q1, dtype=float)
        return cls(
            horizon,
            count_classes(2, horizon),
            np.column_stack([1.0 - q1, q1]),
            np.zeros(horizon + 1, dtype=bool),
        )

    @property
    def alphabet_size(self) -> int:
        return self.probs.shape[1]

    @property
    def q1(self) -> np.ndarray:
        if self.alphabet_size != 2:
            raise ValueError("q1 is only defined for binary tables")
        return self.probs[:, 1]

    def row(self, stat: SuffStat) -> np.ndarray:
        if stat.trials != self.horizon:
            raise ValueError(f"statistic has {stat.trials} trials, table horizon is {self.horizon}")
        hit = np.flatnonzero(np.all(self.classes == np.asarray(stat.counts), axis=1))
        if hit.size == 0:
            raise ValueError(f"count class {stat.counts} is not in the table")
        if self.flagged[hit[0]]:
            raise ValueError(f"count class {stat.counts} has zero marginal under the prior")
        return self.probs[hit[0]]


@dataclass(frozen=True, eq=False)
class BetaCurve:
    p_emp: np.ndarray
    beta: np.ndarray
    singular: np.ndarray

    def __len__(self) -> int:
        return self.p_emp.size


# ── Mixture kernel ────────────────────────────────────────────────────────


class MixtureKernel:
    """Count-class likelihoods of every grid point for one history length.

    The weight matrix is built once and reused by every solver iteration.
    Mixture sums run on a column-rescaled copy (log-sum-exp with the column
    maximum over grid points pulled out) so they survive the underflow of
    raw binomial weights.
    """

    def __init__(self, probs: np.ndarray, horizon: int, threads: int | None = None) -> None:
        self.probs = np.asarray(probs, dtype=float)
        self.horizon = int(horizon)
        self.threads = threads
        self.classes = count_classes(self.probs.shape[1], self.horizon)
        log_w = log_count_weights(self.probs, self.classes)
        finite = np.where(np.isfinite(log_w), log_w, -np.inf)
        shift = finite.max(axis=0)
        self.shift = np.where(np.isfinite(shift), shift, 0.0)
        with np.errstate(under="ignore"):
            self.scaled = np.exp(log_w - self.shift)
            self.weights = np.exp(log_w)
        self.log_weights = log_w
        self._self_entropy = xlogy(self.probs, self.probs)

    @classmethod
    def for_grid(cls, grid: ParamGrid, N: int, threads: int | None = None) -> MixtureKernel:
        """Kernel over histories of length N - 1 (predicting the N-th symbol)."""
        if N < 1:
            raise ValueError(f"batch size N must be at least 1, got {N}")
        return cls(grid.probs, N - 1, threads)

    def __len__(self) -> int:
        return self.probs.shape[0]

    def _mixture_sums(self, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        def block(rows: slice) -> tuple[np.ndarray, np.ndarray]:
            w = weights[rows]
            den = w @ self.scaled[rows]
            num = (w[:, None] * self.probs[rows]).T @ self.scaled[rows]
            return den, num

        den = np.zeros(self.classes.shape[0])
        num = np.zeros((self.probs.shape[1], self.classes.shape[0]))
        for d, n in map_blocks(block, len(self), self.threads):
            den += d
            num += n
        return den, num

    def table(self, prior: Prior) -> PredictiveTable:
        den, num = self._mixture_sums(prior.weights)
        flagged = ~(den > 0)
        safe = np.where(flagged, 1.0, den)
        q = np.clip((num / safe).T, 0.0, 1.0)
        q[flagged] = 1.0 / self.probs.shape[1]
        return PredictiveTable(self.horizon, self.classes, q, flagged)

    def log_marginals(self, prior: Prior) -> np.ndarray:
        den, _ = self._mixture_sums(prior.weights)
        with np.errstate(divide="ignore"):
            return np.log(den) + self.shift

    def divergences(self, table: PredictiveTable) -> np.ndarray:
        """Conditional KL from every grid point to the table's predictor."""
        if table.horizon != self.horizon:
            raise ValueError(f"table horizon {table.horizon} does not match kernel horizon {self.horizon}")
        return divergence_rows(self.probs, self.weights, self._self_entropy, table, self.threads)


def divergence_rows(
    probs: np.ndarray,
    weights: np.ndarray,
    self_entropy: np.ndarray,
    table: PredictiveTable,
    threads: int | None,
) -> np.ndarray:
    active = ~table.flagged
    q = table.probs
    zero = (q == 0) & active[:, None]
    with np.errstate(divide="ignore"):
        log_q = np.where(active[:, None] & ~zero, np.log(np.where(zero, 1.0, q)), 0.0)
    mask = active.astype(float)
    any_zero = bool(zero.any())

    def block(rows: slice) -> np.ndarray:
        w = weights[rows]
        phi = probs[rows]
        mass = w @ mask
        cross = w @ log_q
        d = (self_entropy[rows] * mass[:, None] - phi * cross).sum(axis=1)
        d = np.maximum(d, 0.0)
        if any_zero:
            hits = ((w > 0).astype(float) @ zero.astype(float)) > 0
            d[np.any(hits & (phi > 0), axis=1)] = np.inf
        return d

    return np.concatenate(map_blocks(block, probs.shape[0], threads))


# ── Operations ────────────────────────────────────────────────────────────


def predictive_from_prior(
    grid: ParamGrid, prior: Prior, N: int, threads: int | None = None
) -> PredictiveTable:
    """Q_pi(y_N | y^{N-1}) for every count class of the N - 1 history."""
    prior.check_aligned(grid)
    return MixtureKernel.for_grid(grid, N, threads).table(prior)


def seq_log_marginal(grid: ParamGrid, prior: Prior, stat: SuffStat) -> float:
    """log sum_j pi_j P_j(count class)."""
    prior.check_aligned(grid)
    if len(stat.counts) != grid.alphabet_size:
        raise ValueError("statistic and grid disagree on alphabet size")
    log_w = log_count_weights(grid.probs, np.asarray(stat.counts))[:, 0]
    with np.errstate(divide="ignore"):
        log_pi = np.log(prior.weights)
    return float(logsumexp(log_pi + log_w))


def add_beta(table: PredictiveTable, k: int) -> tuple[float, bool]:
    """beta such that Q(1 | k) = (k + beta) / (n + 2 beta); (nan, True) when undefined."""
    n = table.horizon
    if table.alphabet_size != 2:
        raise ValueError("add-beta is only defined for binary alphabets")
    if n < 1:
        raise ValueError("add-beta needs at least one training symbol")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    if table.flagged[k] or 2 * k == n:
        # At k = n/2 the rule is 1/2 for every beta.
        return float("nan"), True
    q = float(table.q1[k])
    denom = 1.0 - 2.0 * q
    if abs(denom) <= SINGULAR_TOLERANCE:
        return float("nan"), True
    return n * (q - k / n) / denom, False


def beta_curve(table: PredictiveTable) -> BetaCurve:
    n = table.horizon
    pairs = [add_beta(table, k) for k in range(n + 1)]
    return BetaCurve(
        p_emp=np.arange(n + 1) / n,
        beta=np.array([b for b, _ in pairs]),
        singular=np.array([s for _, s in pairs], dtype=bool),
    )
