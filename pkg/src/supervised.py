"""Supervised batch learning: labels from a memoryless channel of known-distribution features.

Only binary feature alphabets are handled. Training data of length N - 1 is
summarized by n0 (number of x = 0 samples) and the label count vector of
each feature row; the per-row counts are multinomial given n0, and n0 itself
is Binomial(N - 1, P(x = 0)).
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy
from scipy.stats import binom

from src.divergence import DivergenceProfile, div_to_set, prior_average
from src.family import (
    MAX_ALPHABET,
    SUM_TOLERANCE,
    HypothesisSet,
    ParamGrid,
    ParamPoint,
    count_classes,
    log_count_weights,
)
from src.predictor import Prior
from src.solver import (
    DEFAULT_LAMBDA,
    DEFAULT_LOG_EVERY,
    DEFAULT_MAX_ITERS,
    RegretReport,
    SolverState,
    default_epsilon,
    run_ab,
)
from src.workers import map_ordered

logger = logging.getLogger(__name__)

FEATURE_ALPHABET = 2
EXACT_LIMIT = 200
DEFAULT_SAMPLES = 2000
MC_CHUNKS = 16


# ── Data classes ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ChannelParam:
    """P(y | x), one row per feature symbol."""

    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(float(v) for v in row) for row in self.rows)
        _check_channel(np.asarray(rows, dtype=float))
        object.__setattr__(self, "rows", rows)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float)

    def row(self, x: int) -> ParamPoint:
        return ParamPoint(self.rows[x])


@dataclass(frozen=True)
class FeatureDist:
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(v) for v in self.probs)
        if len(probs) != FEATURE_ALPHABET:
            raise ValueError(f"feature alphabet must have {FEATURE_ALPHABET} symbols")
        if any(p < 0 or p > 1 for p in probs) or abs(sum(probs) - 1.0) > SUM_TOLERANCE:
            raise ValueError(f"feature distribution must be a probability vector, got {probs}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def bernoulli(cls, p1: float) -> FeatureDist:
        """P(x = 1) = p1."""
        return cls((1.0 - float(p1), float(p1)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


@dataclass(frozen=True)
class SupStat:
    """Label counts k[x][y] of the training pairs."""

    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        counts = tuple(tuple(int(c) for c in row) for row in self.counts)
        if len(counts) != FEATURE_ALPHABET or len({len(r) for r in counts}) != 1:
            raise ValueError("supervised statistic needs one equal-length count row per feature")
        if any(c < 0 for row in counts for c in row):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_pairs(cls, xs, ys, label_size: int) -> SupStat:
        counts = np.zeros((FEATURE_ALPHABET, label_size), dtype=np.int64)
        for x, y in zip(xs, ys, strict=True):
            counts[x, y] += 1
        return cls(tuple(tuple(int(c) for c in row) for row in counts))

    @property
    def row_totals(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.counts)

    @property
    def trials(self) -> int:
        return sum(self.row_totals)


@dataclass(frozen=True, eq=False)
class ChannelGrid:
    """Discretized channel family: probs[j, x, y] = P_j(y | x)."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float, copy=True)
        if probs.ndim != 3 or probs.shape[0] == 0:
            raise ValueError("channel grid needs a (points x features x labels) array")
        if probs.shape[1] != FEATURE_ALPHABET:
            raise ValueError(f"only {FEATURE_ALPHABET}-symbol feature alphabets are supported")
        _check_channel(probs)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.shape[0]

    @property
    def label_size(self) -> int:
        return self.probs.shape[2]

    def point(self, j: int) -> ChannelParam:
        return ChannelParam(tuple(tuple(float(v) for v in row) for row in self.probs[j]))

    def row_grid(self, x: int) -> np.ndarray:
        return self.probs[:, x, :]


@dataclass(frozen=True, eq=False)
class ProductHypothesis:
    """Θ = Θ_0 x Θ_1: an independent hypothesis set per feature row."""

    rows: tuple[HypothesisSet, ...]

    def __post_init__(self) -> None:
        if len(self.rows) != FEATURE_ALPHABET:
            raise ValueError(f"need one hypothesis set per feature symbol ({FEATURE_ALPHABET})")
        if not all(isinstance(r, HypothesisSet) for r in self.rows):
            raise TypeError("product hypothesis rows must be HypothesisSet instances")

    @classmethod
    def uniform(cls, theta: HypothesisSet) -> ProductHypothesis:
        return cls((theta,) * FEATURE_ALPHABET)

    @classmethod
    def for_bsc(cls, a: float, b: float) -> ProductHypothesis:
        """Crossover in [a, b]: P(y=1|x=0) in [a, b] and P(y=1|x=1) in [1-b, 1-a]."""
        return cls((HypothesisSet.between(a, b), HypothesisSet.between(1.0 - b, 1.0 - a)))

    @classmethod
    def from_grid(cls, grid: ChannelGrid) -> ProductHypothesis:
        """Product of the grid's row sets; contains every grid channel."""
        subgrids = []
        for x in range(FEATURE_ALPHABET):
            rows = np.unique(grid.row_grid(x), axis=0)
            if rows.shape[1] == 2:
                rows = rows[np.argsort(rows[:, 1])]
                subgrids.append(HypothesisSet.from_grid(ParamGrid(rows, rows[0, 1], rows[-1, 1])))
            else:
                subgrids.append(HypothesisSet.from_grid(ParamGrid(rows, 0.0, 1.0)))
        return cls(tuple(subgrids))


@dataclass(frozen=True)
class SupPrediction:
    probs: tuple[float, ...]
    flagged: bool = False


@dataclass(frozen=True)
class SupTerms:
    mutual_info: float
    penalty: float
    r_low: float
    r_high: float
    stderr: float = 0.0
    exact: bool = True


def _check_channel(arr: np.ndarray) -> None:
    if not 2 <= arr.shape[-1] <= MAX_ALPHABET:
        raise ValueError(f"label alphabet size must be in [2, {MAX_ALPHABET}]")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("channel probabilities must lie in [0, 1]")
    if np.any(np.abs(arr.sum(axis=-1) - 1.0) > SUM_TOLERANCE):
        raise ValueError("every channel row must sum to 1")


# ── Grid constructors ─────────────────────────────────────────────────────


def make_bsc_grid(lo: float, hi: float, M: int) -> ChannelGrid:
    """Binary symmetric channels with crossover on M equally spaced points of [lo, hi]."""
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"crossover range must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
    c = np.array([lo]) if lo == hi else np.linspace(lo, hi, M)
    probs = np.stack([np.column_stack([1.0 - c, c]), np.column_stack([c, 1.0 - c])], axis=1)
    return ChannelGrid(probs)


def make_product_grid(row0: ParamGrid, row1: ParamGrid) -> ChannelGrid:
    """Every pairing of a row-0 point with a row-1 point; index j = i0 * len(row1) + i1."""
    if row0.alphabet_size != row1.alphabet_size:
        raise ValueError("row grids disagree on label alphabet size")
    a = np.repeat(row0.probs, len(row1), axis=0)
    b = np.tile(row1.probs, (len(row0), 1))
    return ChannelGrid(np.stack([a, b], axis=1))


def make_constant_grid(grid: ParamGrid) -> ChannelGrid:
    """Channels that ignore the feature: both rows equal each grid point."""
    return ChannelGrid(np.stack([grid.probs, grid.probs], axis=1))


# ── Operations ────────────────────────────────────────────────────────────


def sup_predictive(grid: ChannelGrid, prior: Prior, stat: SupStat, x_next: int) -> SupPrediction:
    """Q_pi(y | x^N, y^{N-1}), depending on the data only through stat and x_next."""
    if len(prior) != len(grid):
        raise ValueError(f"prior has {len(prior)} weights but grid has {len(grid)} points")
    if not 0 <= x_next < FEATURE_ALPHABET:
        raise ValueError(f"x_next must be a feature symbol, got {x_next}")
    counts = np.asarray(stat.counts)
    if counts.shape[1] != grid.label_size:
        raise ValueError("statistic and grid disagree on label alphabet size")
    log_lik = xlogy(counts[None, :, :], grid.probs).sum(axis=(1, 2))
    with np.errstate(divide="ignore"):
        log_post = np.log(prior.weights) + log_lik
    log_den = logsumexp(log_post)
    y_size = grid.label_size
    if not np.isfinite(log_den):
        return SupPrediction(tuple([1.0 / y_size] * y_size), flagged=True)
    post = np.exp(log_post - log_den)
    q = post @ grid.probs[:, x_next, :]
    return SupPrediction(tuple(float(v) for v in q / q.sum()))


def sup_div_to_set(phi: ChannelParam, theta: ProductHypothesis, px: FeatureDist) -> float:
    """sum_x P(x) D(P_phi(.|x) || Θ_x)."""
    if not isinstance(theta, ProductHypothesis):
        raise TypeError("supervised hypothesis sets must be ProductHypothesis instances")
    total = 0.0
    for x, p in enumerate(px.probs):
        if p > 0:
            total += p * div_to_set(phi.row(x), theta.rows[x])
    return total


def sup_penalties(grid: ChannelGrid, theta: ProductHypothesis, px: FeatureDist) -> np.ndarray:
    return np.array([sup_div_to_set(grid.point(j), theta, px) for j in range(len(grid))])


def feature_splits(
    N: int, px: FeatureDist, samples: int = DEFAULT_SAMPLES, seed: int = 0
) -> tuple[np.ndarray, np.ndarray, bool]:
    """n0 values with their weights, and whether the weights are exact.

    Up to EXACT_LIMIT the weights are the Binomial(N - 1, P(x=0)) pmf; beyond
    it n0 is sampled in MC_CHUNKS chunks with seeds spawned from one
    SeedSequence and the weights are empirical frequencies.
    """
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    n = N - 1
    p0 = px.probs[0]
    if N <= EXACT_LIMIT:
        n0 = np.arange(n + 1)
        weights = binom.pmf(n0, n, p0)
        keep = weights > 0
        return n0[keep], weights[keep], True
    if samples < 2:
        raise ValueError(f"Monte-Carlo estimation needs at least 2 samples, got {samples}")
    sizes = [samples // MC_CHUNKS + (1 if i < samples % MC_CHUNKS else 0) for i in range(MC_CHUNKS)]
    children = np.random.SeedSequence(seed).spawn(MC_CHUNKS)
    draws = np.concatenate([
        np.random.default_rng(child).binomial(n, p0, size=size)
        for child, size in zip(children, sizes, strict=True)
    ])
    values, counts = np.unique(draws, return_counts=True)
    return values, counts / samples, False


class SupervisedKernel:
    """Per-n0 row likelihood matrices for one channel grid and batch size."""

    def __init__(
        self,
        grid: ChannelGrid,
        N: int,
        px: FeatureDist,
        samples: int = DEFAULT_SAMPLES,
        seed: int = 0,
        threads: int | None = None,
    ) -> None:
        self.grid = grid
        self.N = N
        self.px = px
        self.threads = threads
        self.n0, self.split_weights, self.exact = feature_splits(N, px, samples, seed)
        y_size = grid.label_size
        self._self_entropy = xlogy(grid.probs, grid.probs).sum(axis=2)
        with np.errstate(under="ignore"):
            self._blocks = [
                (
                    np.exp(log_count_weights(grid.row_grid(0), count_classes(y_size, int(n0)))),
                    np.exp(log_count_weights(grid.row_grid(1), count_classes(y_size, N - 1 - int(n0)))),
                )
                for n0 in self.n0
            ]

    def _block_divergences(self, prior: Prior, block: int) -> np.ndarray:
        w0, w1 = self._blocks[block]
        ch = self.grid.probs
        pi = prior.weights
        pw0 = pi[:, None] * w0
        den = pw0.T @ w1
        active = den > 0
        safe = np.where(active, den, 1.0)
        mass = ((w0 @ active.astype(float)) * w1).sum(axis=1)
        d = np.zeros(len(self.grid))
        infinite = np.zeros(len(self.grid), dtype=bool)
        for x, p in enumerate(self.px.probs):
            if p == 0:
                continue
            cross = np.zeros(len(self.grid))
            for y in range(self.grid.label_size):
                num = (pw0 * ch[:, x, y][:, None]).T @ w1
                zero = active & (num <= 0)
                with np.errstate(divide="ignore"):
                    log_q = np.where(active & ~zero, np.log(np.where(zero, 1.0, num / safe)), 0.0)
                cross += ch[:, x, y] * ((w0 @ log_q) * w1).sum(axis=1)
                if zero.any():
                    hits = (((w0 > 0).astype(float) @ zero.astype(float)) * (w1 > 0)).sum(axis=1) > 0
                    infinite |= hits & (ch[:, x, y] > 0)
            d += p * (self._self_entropy[:, x] * mass - cross)
        d = np.maximum(d, 0.0)
        d[infinite] = np.inf
        return d

    def block_divergences(self, prior: Prior) -> list[np.ndarray]:
        return map_ordered(lambda b: self._block_divergences(prior, b), list(range(len(self.n0))),
                           self.threads)

    def divergences(self, prior: Prior) -> np.ndarray:
        """Conditional KL from every channel to Q_pi, averaged over n0."""
        total = np.zeros(len(self.grid))
        for weight, d in zip(self.split_weights, self.block_divergences(prior), strict=True):
            total = total + weight * d
        return total


def sup_regret_terms(
    grid: ChannelGrid,
    prior: Prior,
    theta: ProductHypothesis,
    px: FeatureDist,
    N: int,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    threads: int | None = None,
) -> SupTerms:
    """Supervised mutual information, expected penalty and the R_L / R_U pair."""
    if len(prior) != len(grid):
        raise ValueError(f"prior has {len(prior)} weights but grid has {len(grid)} points")
    kernel = SupervisedKernel(grid, N, px, samples, seed, threads)
    penalties = sup_penalties(grid, theta, px)
    blocks = kernel.block_divergences(prior)
    to_predictor = np.zeros(len(grid))
    for weight, d in zip(kernel.split_weights, blocks, strict=True):
        to_predictor = to_predictor + weight * d
    profile = DivergenceProfile(to_predictor, penalties)
    values = profile.values
    r_low = prior_average(prior, values)
    stderr = 0.0
    if not kernel.exact:
        per_split = np.array([prior_average(prior, d) for d in blocks])
        mean = float(np.dot(kernel.split_weights, per_split))
        var = float(np.dot(kernel.split_weights, (per_split - mean) ** 2)) * samples / (samples - 1)
        stderr = float(np.sqrt(var / samples))
    return SupTerms(
        mutual_info=prior_average(prior, to_predictor),
        penalty=prior_average(prior, penalties),
        r_low=r_low,
        r_high=float(values.max()),
        stderr=stderr,
        exact=kernel.exact,
    )


@dataclass(frozen=True, eq=False)
class SupervisedConfig:
    N: int
    grid: ChannelGrid
    theta: ProductHypothesis
    px: FeatureDist
    lam: float = DEFAULT_LAMBDA
    epsilon: float | None = None
    max_iters: int = DEFAULT_MAX_ITERS
    initial_prior: Prior | None = None
    log_every: int = DEFAULT_LOG_EVERY
    threads: int | None = None
    samples: int = DEFAULT_SAMPLES
    seed: int = 0

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError(f"N must be at least 1, got {self.N}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", default_epsilon(self.N))
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if not isinstance(self.theta, ProductHypothesis):
            raise TypeError("supervised hypothesis sets must be ProductHypothesis instances")
        if self.initial_prior is not None and len(self.initial_prior) != len(self.grid):
            raise ValueError("initial prior does not match the channel grid")


def sup_solve(
    config: SupervisedConfig, callback: Callable[[SolverState], None] | None = None
) -> RegretReport:
    """Arimoto-Blahut on the supervised divergence profile.

    Beyond EXACT_LIMIT the n0 draws are fixed once, so every iteration
    optimizes the same sampled objective.
    """
    kernel = SupervisedKernel(config.grid, config.N, config.px, config.samples, config.seed,
                              config.threads)
    penalties = sup_penalties(config.grid, config.theta, config.px)
    if not kernel.exact:
        logger.warning("N=%d exceeds the exact limit %d; using %d Monte-Carlo feature draws",
                       config.N, EXACT_LIMIT, config.samples)

    def evaluate(prior: Prior) -> DivergenceProfile:
        return DivergenceProfile(kernel.divergences(prior), penalties)

    logger.info("supervised solve N=%d M=%d P(x=1)=%g", config.N, len(config.grid),
                config.px.probs[1])
    return run_ab(
        evaluate,
        config.initial_prior or Prior.uniform(len(config.grid)),
        N=config.N,
        lam=config.lam,
        epsilon=config.epsilon,
        max_iters=config.max_iters,
        log_every=config.log_every,
        callback=callback,
        label="supervised",
    )
