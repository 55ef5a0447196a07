"""Parametric i.i.d. families on finite alphabets, their grids and hypothesis sets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, xlogy

MAX_ALPHABET = 4
SUM_TOLERANCE = 1e-12


# ── Data classes ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self) -> None:
        if self.size < 2:
            raise ValueError(f"alphabet size must be at least 2, got {self.size}")


@dataclass(frozen=True)
class ParamPoint:
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        _check_probability_vector(self.probs, "ParamPoint")

    @classmethod
    def bernoulli(cls, p: float) -> ParamPoint:
        """Ber(p): symbol 1 has probability p, symbol 0 has 1 - p."""
        return cls((1.0 - float(p), float(p)))

    @property
    def alphabet_size(self) -> int:
        return len(self.probs)

    @property
    def p(self) -> float:
        return self.probs[-1]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


@dataclass(frozen=True, eq=False)
class ParamGrid:
    """Ordered, read-only discretization of a family.

    probs has one row per grid point and one column per alphabet symbol.
    For Bernoulli grids lo/hi bound the success probability; simplex grids
    use the full [0, 1] box.
    """

    probs: np.ndarray
    lo: float
    hi: float

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float, copy=True)
        if probs.ndim != 2 or probs.shape[0] == 0:
            raise ValueError("grid needs a non-empty (points x symbols) array")
        if not 2 <= probs.shape[1] <= MAX_ALPHABET:
            raise ValueError(f"alphabet size must be in [2, {MAX_ALPHABET}], got {probs.shape[1]}")
        if np.any(probs < 0) or np.any(probs > 1):
            raise ValueError("grid probabilities must lie in [0, 1]")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > SUM_TOLERANCE):
            raise ValueError("every grid point must sum to 1")
        if len(np.unique(probs, axis=0)) != probs.shape[0]:
            raise ValueError("grid points must be pairwise distinct")
        if probs.shape[1] == 2:
            p = probs[:, 1]
            if np.any(np.diff(p) <= 0):
                raise ValueError("Bernoulli grid points must be sorted ascending")
            if p[0] < self.lo - SUM_TOLERANCE or p[-1] > self.hi + SUM_TOLERANCE:
                raise ValueError("grid point outside declared range")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.probs.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.probs.shape[1]

    @property
    def is_bernoulli(self) -> bool:
        return self.alphabet_size == 2

    @property
    def success(self) -> np.ndarray:
        """Success probabilities of a Bernoulli grid."""
        if not self.is_bernoulli:
            raise ValueError("success probabilities are only defined for Bernoulli grids")
        return self.probs[:, 1]

    def point(self, j: int) -> ParamPoint:
        return ParamPoint(tuple(float(v) for v in self.probs[j]))


@dataclass(frozen=True, eq=False)
class HypothesisSet:
    """Either a Bernoulli interval [a, b] or an explicit sub-grid."""

    interval: tuple[float, float] | None = None
    subgrid: ParamGrid | None = None

    def __post_init__(self) -> None:
        if (self.interval is None) == (self.subgrid is None):
            raise ValueError("hypothesis set needs exactly one of interval or subgrid")
        if self.interval is not None:
            a, b = (float(v) for v in self.interval)
            if not 0.0 <= a <= b <= 1.0:
                raise ValueError(f"hypothesis interval must satisfy 0 <= a <= b <= 1, got [{a}, {b}]")
            object.__setattr__(self, "interval", (a, b))

    @classmethod
    def between(cls, a: float, b: float) -> HypothesisSet:
        return cls(interval=(a, b))

    @classmethod
    def from_grid(cls, grid: ParamGrid) -> HypothesisSet:
        return cls(subgrid=grid)

    @property
    def is_interval(self) -> bool:
        return self.interval is not None

    def contains(self, point: ParamPoint | np.ndarray) -> bool:
        probs = point.as_array() if isinstance(point, ParamPoint) else np.asarray(point, dtype=float)
        if self.interval is not None:
            a, b = self.interval
            return a <= probs[-1] <= b
        return bool(np.any(np.all(self.subgrid.probs == probs, axis=1)))

    def within(self, lo: float, hi: float) -> bool:
        """Whether the set sits inside the box [lo, hi] (Θ ⊆ Φ)."""
        if self.interval is not None:
            a, b = self.interval
            return lo - SUM_TOLERANCE <= a and b <= hi + SUM_TOLERANCE
        if self.subgrid.is_bernoulli:
            p = self.subgrid.success
            return bool(p.min() >= lo - SUM_TOLERANCE and p.max() <= hi + SUM_TOLERANCE)
        return True


@dataclass(frozen=True)
class SuffStat:
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2:
            raise ValueError("a sufficient statistic needs at least two symbol counts")
        if any(c < 0 for c in counts):
            raise ValueError(f"counts must be nonnegative, got {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def bernoulli(cls, ones: int, trials: int) -> SuffStat:
        return cls((trials - ones, ones))

    @property
    def trials(self) -> int:
        return sum(self.counts)


def _check_probability_vector(probs, label: str) -> None:
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"{label} needs a vector of at least two probabilities")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError(f"{label} components must lie in [0, 1]")
    if abs(arr.sum() - 1.0) > SUM_TOLERANCE:
        raise ValueError(f"{label} components must sum to 1, got {arr.sum()!r}")


# ── Grids ─────────────────────────────────────────────────────────────────


def default_resolution(N: int) -> int:
    """Grid size that keeps quadrature error below 1e-4 in 2N-normalized regret."""
    return 1001 if N <= 200 else 2001


def make_uniform_grid(lo: float, hi: float, M: int) -> ParamGrid:
    """M equally spaced Bernoulli points over [lo, hi], endpoints included."""
    lo, hi = float(lo), float(hi)
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"grid range must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
    if M < 1:
        raise ValueError(f"grid resolution must be at least 1, got {M}")
    if lo == hi:
        p = np.array([lo])
    else:
        if M < 2:
            raise ValueError("a non-degenerate range needs at least 2 grid points")
        p = np.linspace(lo, hi, M)
    return ParamGrid(np.column_stack([1.0 - p, p]), lo, hi)


def make_simplex_grid(alphabet_size: int, divisions: int) -> ParamGrid:
    """Lattice over the probability simplex with coordinates i / divisions."""
    Alphabet(alphabet_size)
    if alphabet_size > MAX_ALPHABET:
        raise ValueError(f"alphabets beyond size {MAX_ALPHABET} are not supported")
    if divisions < 1:
        raise ValueError("simplex grid needs at least one division")
    lattice = count_classes(alphabet_size, divisions).astype(float) / divisions
    return ParamGrid(lattice, 0.0, 1.0)


def box_subgrid(grid: ParamGrid, lo: float, hi: float) -> ParamGrid:
    """Grid points whose coordinates all lie in [lo, hi]."""
    keep = np.all((grid.probs >= lo - SUM_TOLERANCE) & (grid.probs <= hi + SUM_TOLERANCE), axis=1)
    if not keep.any():
        raise ValueError(f"no grid point has every coordinate inside [{lo}, {hi}]")
    if grid.is_bernoulli:
        return ParamGrid(grid.probs[keep], max(lo, grid.lo), min(hi, grid.hi))
    return ParamGrid(grid.probs[keep], 0.0, 1.0)


# ── Count classes ─────────────────────────────────────────────────────────


@lru_cache(maxsize=256)
def _compositions(n: int, parts: int) -> tuple[tuple[int, ...], ...]:
    if parts == 1:
        return ((n,),)
    out: list[tuple[int, ...]] = []
    for last in range(n + 1):
        for head in _compositions(n - last, parts - 1):
            out.append(head + (last,))
    return tuple(out)


def count_classes(alphabet_size: int, n: int) -> np.ndarray:
    """All count vectors with total n, one row each.

    Binary alphabets come out as (n - k, k) for k = 0..n, so the row index
    is the number of ones.
    """
    if n < 0:
        raise ValueError(f"trial count must be nonnegative, got {n}")
    Alphabet(alphabet_size)
    arr = np.array(_compositions(n, alphabet_size), dtype=np.int64)
    arr.setflags(write=False)
    return arr


# ── Likelihoods ───────────────────────────────────────────────────────────


def log_count_weights(probs: np.ndarray, classes: np.ndarray) -> np.ndarray:
    """Log multinomial probability of each count class under each point.

    Returns a (points x classes) matrix. 0 * log 0 = 0, so boundary points
    are legal; a zero-probability symbol with a positive count gives -inf.
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    classes = np.atleast_2d(np.asarray(classes))
    n = classes.sum(axis=1)
    coeff = gammaln(n + 1.0) - gammaln(classes + 1.0).sum(axis=1)
    out = np.broadcast_to(coeff, (probs.shape[0], classes.shape[0])).copy()
    for a in range(probs.shape[1]):
        out += xlogy(classes[None, :, a], probs[:, a][:, None])
    return out


def log_count_weight(phi: ParamPoint, stat: SuffStat) -> float:
    """Log-probability of a count class under i.i.d. draws from phi."""
    if len(stat.counts) != phi.alphabet_size:
        raise ValueError("statistic and parameter point disagree on alphabet size")
    return float(log_count_weights(phi.as_array(), np.asarray(stat.counts))[0, 0])


# ── Hypothesis extension ──────────────────────────────────────────────────


def epsilon_n(N: int, alpha: float) -> float:
    """Shell width N^(alpha - 1) used for the sandwich upper bound."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(N) ** (alpha - 1.0)


def shell_delta(c: float, eps: float) -> float:
    return math.sqrt(2.0 * c * (1.0 - c) * eps)


def theta_epsilon(theta: HypothesisSet, eps: float, phi_range: tuple[float, float]) -> HypothesisSet:
    """Extend [a, b] by sqrt(2c(1-c)eps) on each side, clipped to phi_range."""
    if not theta.is_interval:
        raise ValueError("theta_epsilon needs an interval hypothesis set")
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    a, b = theta.interval
    lo, hi = phi_range
    return HypothesisSet.between(
        max(lo, a - shell_delta(a, eps)),
        min(hi, b + shell_delta(b, eps)),
    )

