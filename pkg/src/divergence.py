"""Conditional KL quantities: per-symbol KL, projection onto Θ, divergence to Q_pi."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr, xlogy

from src.family import HypothesisSet, ParamGrid, ParamPoint, log_count_weights
from src.predictor import MixtureKernel, PredictiveTable, Prior, divergence_rows

# Infinite divergences enter solver arithmetic as this many nats.
SATURATION = 1e12


@dataclass(frozen=True, eq=False)
class DivergenceProfile:
    """Per-grid-point D(P_phi || Q_pi) and D(P_phi || Θ), in nats."""

    to_predictor: np.ndarray
    to_set: np.ndarray

    @property
    def values(self) -> np.ndarray:
        """d_j = D(P_j || Q_pi) - D(P_j || Θ); +/-inf where one side is infinite."""
        d = saturate(self.to_predictor) - saturate(self.to_set)
        return unsaturate(d)

    def saturated(self) -> np.ndarray:
        return saturate(self.to_predictor) - saturate(self.to_set)


def saturate(values: np.ndarray) -> np.ndarray:
    return np.clip(np.nan_to_num(values, nan=0.0, posinf=SATURATION, neginf=-SATURATION),
                   -SATURATION, SATURATION)


def unsaturate(values: np.ndarray | float):
    """Map saturated magnitudes back to +/-inf for reporting."""
    arr = np.asarray(values, dtype=float)
    out = np.where(arr >= SATURATION / 10, np.inf, np.where(arr <= -SATURATION / 10, -np.inf, arr))
    return float(out) if out.ndim == 0 else out


# ── Single-symbol divergences ─────────────────────────────────────────────


def kl_single(phi: ParamPoint, theta: ParamPoint) -> float:
    """D(phi || theta) for one symbol; +inf when theta misses phi's support."""
    if phi.alphabet_size != theta.alphabet_size:
        raise ValueError("points disagree on alphabet size")
    return float(rel_entr(phi.as_array(), theta.as_array()).sum())


def _projection_divergences(probs: np.ndarray, theta: HypothesisSet) -> np.ndarray:
    if theta.is_interval:
        if probs.shape[1] != 2:
            raise ValueError("interval hypothesis sets need a binary alphabet")
        a, b = theta.interval
        p = probs[:, 1]
        out = np.zeros(probs.shape[0])
        outside = (p < a) | (p > b)
        # KL's theta-derivative is monotone, so the projection is the clamp.
        t = np.clip(p[outside], a, b)
        proj = np.column_stack([1.0 - t, t])
        out[outside] = np.maximum(rel_entr(probs[outside], proj).sum(axis=1), 0.0)
        return out
    sub = theta.subgrid.probs
    if sub.shape[1] != probs.shape[1]:
        raise ValueError("hypothesis sub-grid and points disagree on alphabet size")
    out = np.empty(probs.shape[0])
    for j, phi in enumerate(probs):
        out[j] = max(rel_entr(phi[None, :], sub).sum(axis=1).min(), 0.0)
    return out


def div_to_set(phi: ParamPoint, theta: HypothesisSet) -> float:
    """inf over Θ of D(phi || theta)."""
    return float(_projection_divergences(phi.as_array()[None, :], theta)[0])


def set_penalties(grid: ParamGrid, theta: HypothesisSet) -> np.ndarray:
    """div_to_set for every grid point."""
    return _projection_divergences(grid.probs, theta)


# ── Divergences to the mixture predictor ──────────────────────────────────


def cond_div_to_predictor(phi: ParamPoint, table: PredictiveTable, N: int) -> float:
    """Expected one-step KL from phi to Q_pi, averaged over phi's N - 1 histories."""
    if table.horizon != N - 1:
        raise ValueError(f"table horizon {table.horizon} does not match N - 1 = {N - 1}")
    probs = phi.as_array()[None, :]
    with np.errstate(under="ignore"):
        weights = np.exp(log_count_weights(probs, table.classes))
    return float(divergence_rows(probs, weights, xlogy(probs, probs), table, 1)[0])


def prior_average(prior: Prior, values: np.ndarray) -> float:
    """E_pi{values}, skipping zero-weight points (0 * inf = 0)."""
    w = prior.weights
    live = w > 0
    return float(np.dot(w[live], values[live]))


def mutual_info(
    grid: ParamGrid,
    prior: Prior,
    table: PredictiveTable,
    N: int,
    kernel: MixtureKernel | None = None,
) -> float:
    """I(Y_N; Phi | Y^{N-1}) = E_pi{D(P_phi || Q_pi)}."""
    prior.check_aligned(grid)
    if kernel is None:
        kernel = MixtureKernel.for_grid(grid, N)
    return prior_average(prior, kernel.divergences(table))


def divergence_profile(
    grid: ParamGrid,
    prior: Prior,
    theta: HypothesisSet,
    N: int,
    kernel: MixtureKernel | None = None,
    penalties: np.ndarray | None = None,
) -> DivergenceProfile:
    prior.check_aligned(grid)
    if kernel is None:
        kernel = MixtureKernel.for_grid(grid, N)
    table = kernel.table(prior)
    to_set = set_penalties(grid, theta) if penalties is None else penalties
    return DivergenceProfile(kernel.divergences(table), to_set)
