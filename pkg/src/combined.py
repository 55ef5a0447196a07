"""Batch-then-online regret: predicting L further symbols after a batch of N - 1."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

from src.divergence import DivergenceProfile, cond_div_to_predictor, div_to_set, set_penalties
from src.family import (
    HypothesisSet,
    ParamGrid,
    ParamPoint,
    default_resolution,
    epsilon_n,
    make_uniform_grid,
    theta_epsilon,
)
from src.predictor import MixtureKernel, Prior, predictive_from_prior
from src.solver import RegretReport, SolverConfig, SolverState, capacity, run_ab

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CombinedConfig(SolverConfig):
    L: int = 1

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.L < 1:
            raise ValueError(f"L must be at least 1, got {self.L}")


def step_horizons(N: int, L: int) -> list[int]:
    """History lengths of the L predicted symbols: N - 1, ..., N + L - 2."""
    return [N - 1 + t for t in range(L)]


def combined_div_to_predictor(
    phi: ParamPoint, grid: ParamGrid, prior: Prior, N: int, L: int
) -> float:
    """Chain-rule sum of one-step divergences over the L online steps (total nats)."""
    if L < 1:
        raise ValueError(f"L must be at least 1, got {L}")
    total = 0.0
    for n in step_horizons(N, L):
        table = predictive_from_prior(grid, prior, n + 1)
        total += cond_div_to_predictor(phi, table, n + 1)
    return total


def combined_div_to_set(phi: ParamPoint, theta: HypothesisSet, L: int) -> float:
    """L times the one-symbol projection, since Θ is i.i.d."""
    if L < 1:
        raise ValueError(f"L must be at least 1, got {L}")
    return L * div_to_set(phi, theta)


def combined_solve(
    config: CombinedConfig, callback: Callable[[SolverState], None] | None = None
) -> RegretReport:
    """Arimoto-Blahut over the L-step objective; reports are per predicted symbol."""
    kernels = [MixtureKernel(config.grid.probs, n, config.threads)
               for n in step_horizons(config.N, config.L)]
    penalties = config.L * set_penalties(config.grid, config.theta)

    def evaluate(prior: Prior) -> DivergenceProfile:
        to_predictor = kernels[0].divergences(kernels[0].table(prior))
        for kernel in kernels[1:]:
            to_predictor = to_predictor + kernel.divergences(kernel.table(prior))
        return DivergenceProfile(to_predictor, penalties)

    logger.info("combined solve N=%d L=%d M=%d", config.N, config.L, len(config.grid))
    return run_ab(
        evaluate,
        config.initial_prior or Prior.uniform(len(config.grid)),
        N=config.N,
        lam=config.lam,
        epsilon=config.epsilon,
        max_iters=config.max_iters,
        log_every=config.log_every,
        scale=1.0 / config.L,
        callback=callback,
        label="combined",
    )


@dataclass(frozen=True, eq=False)
class CombinedBound:
    value: float
    steps: tuple[RegretReport, ...]


def combined_upper_bound(
    theta: HypothesisSet,
    phi_range: tuple[float, float],
    N: int,
    L: int,
    alpha: float,
    M: int | None = None,
    **params,
) -> CombinedBound:
    """(1/L) sum_t C_{c,n_t}(Θ_eps(n_t)) over the batch sizes n_t = N .. N + L - 1."""
    if not theta.is_interval:
        raise ValueError("combined upper bound needs an interval hypothesis set")
    steps = []
    for n in range(N, N + L):
        extended = theta_epsilon(theta, epsilon_n(n, alpha), phi_range)
        grid = make_uniform_grid(*extended.interval, M or default_resolution(n))
        steps.append(capacity(grid, n, **params))
    value = sum(r.midpoint for r in steps) / L
    logger.info("combined upper bound N=%d L=%d: %.10g", N, L, value)
    return CombinedBound(value=value, steps=tuple(steps))
