"""Extended Arimoto-Blahut iteration with its R_L / R_U regret certificate."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from src.divergence import (
    DivergenceProfile,
    prior_average,
    set_penalties,
    unsaturate,
)
from src.family import (
    HypothesisSet,
    ParamGrid,
    default_resolution,
    epsilon_n,
    make_uniform_grid,
    theta_epsilon,
)
from src.predictor import MixtureKernel, Prior

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 1.0
DEFAULT_MAX_ITERS = 200_000
DEFAULT_LOG_EVERY = 100
WEIGHT_FLOOR = 1e-300


class SolverError(RuntimeError):
    pass


# Reference reproductions: step proportional to N, gap 1e-3 in 2N units.
REFERENCE_STEP_PER_SAMPLE = 0.04
REFERENCE_GAP = 1e-3


def default_epsilon(N: int) -> float:
    """Gap threshold that keeps 2N * regret trustworthy to ~1e-5."""
    return 1e-5 / (2.0 * N)


def reference_settings(N: int) -> dict[str, float]:
    """lam and epsilon for the reference table, sandwich and long reproductions."""
    return {
        "lam": max(DEFAULT_LAMBDA, REFERENCE_STEP_PER_SAMPLE * N),
        "epsilon": REFERENCE_GAP / (2.0 * N),
    }


# ── Data classes ──────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class SolverConfig:
    N: int
    grid: ParamGrid
    theta: HypothesisSet
    lam: float = DEFAULT_LAMBDA
    epsilon: float | None = None
    max_iters: int = DEFAULT_MAX_ITERS
    initial_prior: Prior | None = None
    log_every: int = DEFAULT_LOG_EVERY
    threads: int | None = None

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
        if self.log_every < 1:
            raise ValueError(f"log_every must be at least 1, got {self.log_every}")
        if self.initial_prior is not None:
            self.initial_prior.check_aligned(self.grid)
        if self.grid.is_bernoulli and not self.theta.within(self.grid.lo, self.grid.hi):
            raise ValueError("hypothesis set must lie inside the data-generating range")


@dataclass(frozen=True, eq=False)
class SolverState:
    iteration: int
    prior: Prior
    r_low: float
    r_high: float

    @property
    def gap(self) -> float:
        return self.r_high - self.r_low


@dataclass(frozen=True, eq=False)
class RegretReport:
    """Certified regret bounds in nats (per predicted symbol)."""

    N: int
    r_low: float
    r_high: float
    iterations: int
    converged: bool
    prior: Prior
    epsilon: float
    history: tuple[tuple[int, float, float], ...] = field(default=())

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.r_low + self.r_high)

    @property
    def normalized(self) -> float:
        """2N * midpoint, the unit regret tables are quoted in."""
        return 2.0 * self.N * self.midpoint

    @property
    def gap(self) -> float:
        return self.r_high - self.r_low


# ── Core iteration ────────────────────────────────────────────────────────


def _certificate(prior: Prior, profile: DivergenceProfile, scale: float) -> tuple[float, float]:
    d = profile.saturated()
    r_low = prior_average(prior, d) * scale
    r_high = float(d.max()) * scale
    if r_low > r_high + 1e-12 * max(1.0, abs(r_high)):
        raise SolverError(f"certificate violated: R_L={r_low!r} exceeds R_U={r_high!r}")
    return r_low, r_high


def bounds_from_profile(prior: Prior, profile: DivergenceProfile) -> tuple[float, float]:
    """(E_pi d, max d) with infinities reported as such."""
    r_low, r_high = _certificate(prior, profile, 1.0)
    return unsaturate(r_low), unsaturate(r_high)


def bounds(grid: ParamGrid, prior: Prior, theta: HypothesisSet, N: int) -> tuple[float, float]:
    """(R_L, R_U) of the regret under the given prior."""
    prior.check_aligned(grid)
    kernel = MixtureKernel.for_grid(grid, N)
    profile = DivergenceProfile(kernel.divergences(kernel.table(prior)), set_penalties(grid, theta))
    return bounds_from_profile(prior, profile)


def ab_step(prior: Prior, profile: DivergenceProfile, lam: float) -> Prior:
    """pi_j <- pi_j exp(lam * d_j), renormalized; tiny weights floored to zero."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    w = prior.weights
    live = w > 0
    if not live.any():
        raise SolverError("prior has no live weights")
    logits = np.full(w.shape, -np.inf)
    logits[live] = np.log(w[live]) + lam * profile.saturated()[live]
    logits -= logits[live].max()
    new = np.exp(logits)
    new /= new.sum()
    new[new < WEIGHT_FLOOR] = 0.0
    total = new.sum()
    if not total > 0:
        raise SolverError("Arimoto-Blahut update produced an all-zero weight vector")
    return Prior(new / total)


def run_ab(
    evaluate: Callable[[Prior], DivergenceProfile],
    initial: Prior,
    *,
    N: int,
    lam: float,
    epsilon: float,
    max_iters: int,
    log_every: int = DEFAULT_LOG_EVERY,
    scale: float = 1.0,
    callback: Callable[[SolverState], None] | None = None,
    label: str = "solve",
) -> RegretReport:
    """Iterate the exponential reweighting until R_U - R_L <= epsilon.

    evaluate returns the divergence profile (total nats) under a prior;
    scale converts totals to the reported per-symbol units.
    """
    prior = initial
    profile = evaluate(prior)
    r_low, r_high = _certificate(prior, profile, scale)
    history = [(0, r_low, r_high)]
    iteration = 0
    if callback:
        callback(SolverState(iteration, prior, r_low, r_high))

    while r_high - r_low > epsilon and iteration < max_iters:
        prior = ab_step(prior, profile, lam)
        iteration += 1
        profile = evaluate(prior)
        r_low, r_high = _certificate(prior, profile, scale)
        if callback:
            callback(SolverState(iteration, prior, r_low, r_high))
        if iteration % log_every == 0:
            history.append((iteration, r_low, r_high))
            logger.info(
                "%s iter=%d R_L=%.10g R_U=%.10g gap=%.3g",
                label, iteration, r_low, r_high, r_high - r_low,
            )

    converged = r_high - r_low <= epsilon
    if history[-1][0] != iteration:
        history.append((iteration, r_low, r_high))
    if converged:
        logger.info("%s converged after %d iterations, 2N*R=%.6f", label, iteration,
                    N * (r_low + r_high))
    else:
        logger.warning("%s stopped at max_iters=%d with gap %.3g > %.3g", label, max_iters,
                       r_high - r_low, epsilon)
    return RegretReport(
        N=N,
        r_low=unsaturate(r_low),
        r_high=unsaturate(r_high),
        iterations=iteration,
        converged=converged,
        prior=prior,
        epsilon=epsilon,
        history=tuple(history),
    )


# ── Operations ────────────────────────────────────────────────────────────


def solve(config: SolverConfig, callback: Callable[[SolverState], None] | None = None) -> RegretReport:
    """Capacity-achieving prior and certified regret for (Θ, Φ) at batch size N."""
    kernel = MixtureKernel.for_grid(config.grid, config.N, config.threads)
    penalties = set_penalties(config.grid, config.theta)

    def evaluate(prior: Prior) -> DivergenceProfile:
        return DivergenceProfile(kernel.divergences(kernel.table(prior)), penalties)

    logger.info("solve N=%d M=%d lambda=%g epsilon=%.3g", config.N, len(config.grid),
                config.lam, config.epsilon)
    return run_ab(
        evaluate,
        config.initial_prior or Prior.uniform(len(config.grid)),
        N=config.N,
        lam=config.lam,
        epsilon=config.epsilon,
        max_iters=config.max_iters,
        log_every=config.log_every,
        callback=callback,
    )


def capacity(grid: ParamGrid, N: int, **params) -> RegretReport:
    """Conditional capacity C_{c,N}: the regret with Θ equal to the whole grid."""
    return solve(SolverConfig(N=N, grid=grid, theta=HypothesisSet.from_grid(grid), **params))


def mass_inside(prior: Prior, grid: ParamGrid, interval: tuple[float, float]) -> float:
    """Prior mass on Bernoulli grid points inside [lo, hi]."""
    lo, hi = interval
    p = grid.success
    return float(prior.weights[(p >= lo) & (p <= hi)].sum())


@dataclass(frozen=True, eq=False)
class SandwichResult:
    lower: RegretReport
    middle: RegretReport
    upper: RegretReport
    theta_eps: tuple[float, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return (
            self.lower.midpoint <= self.middle.midpoint + self.tolerance
            and self.middle.midpoint <= self.upper.midpoint + self.tolerance
        )

    @property
    def strict(self) -> bool:
        return self.lower.midpoint < self.middle.midpoint < self.upper.midpoint

    @property
    def converged(self) -> bool:
        return self.lower.converged and self.middle.converged and self.upper.converged

    @property
    def ordered(self) -> tuple[RegretReport, RegretReport, RegretReport]:
        return self.lower, self.middle, self.upper


def verify_sandwich(
    theta: HypothesisSet,
    phi_range: tuple[float, float],
    N: int,
    alpha: float,
    M: int | None = None,
    **params,
) -> SandwichResult:
    """C(Θ) <= R*(Θ, Φ) <= C(Θ_eps) with eps = N^(alpha - 1)."""
    if not theta.is_interval:
        raise ValueError("sandwich check needs an interval hypothesis set")
    lo, hi = phi_range
    if not theta.within(lo, hi):
        raise ValueError("hypothesis set must lie inside the data-generating range")
    M = M or default_resolution(N)
    a, b = theta.interval
    extended = theta_epsilon(theta, epsilon_n(N, alpha), phi_range)
    logger.info("sandwich N=%d alpha=%g theta=[%g, %g] theta_eps=[%.6f, %.6f]",
                N, alpha, a, b, *extended.interval)

    lower = capacity(make_uniform_grid(a, b, M), N, **params)
    middle = solve(SolverConfig(N=N, grid=make_uniform_grid(lo, hi, M), theta=theta, **params))
    upper = capacity(make_uniform_grid(*extended.interval, M), N, **params)
    return SandwichResult(
        lower=lower,
        middle=middle,
        upper=upper,
        theta_eps=extended.interval,
        tolerance=2.0 * max(lower.epsilon, middle.epsilon, upper.epsilon),
    )
