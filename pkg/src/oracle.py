"""Reference values by enumerating every sequence; used to check the count-class fast paths."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from src.family import HypothesisSet, ParamGrid, ParamPoint
from src.predictor import Prior
from src.supervised import ChannelGrid, FeatureDist, ProductHypothesis, SupTerms


class OracleLimitError(ValueError):
    pass


@dataclass(frozen=True)
class OracleLimit:
    max_length: int = 14
    max_supervised_length: int = 6

    def check(self, alphabet: int, length: int, supervised: bool = False) -> None:
        cap = self.max_supervised_length if supervised else self.max_length
        # Sequence count may not exceed the binary (binary x binary when supervised) count.
        if length > cap or alphabet ** length > 2 ** (2 * cap if supervised else cap):
            kind = "supervised " if supervised else ""
            raise OracleLimitError(
                f"{kind}enumeration of {alphabet}^{length} sequences exceeds the oracle limit ({cap})"
            )


DEFAULT_LIMIT = OracleLimit()


@dataclass(frozen=True, eq=False)
class OracleTerms:
    """Enumerated regret terms; r_low / r_high are per predicted symbol."""

    to_predictor: np.ndarray
    to_set: np.ndarray
    r_low: float
    r_high: float


def _seq_probs(probs: np.ndarray, seq: tuple[int, ...]) -> np.ndarray:
    out = np.ones(probs.shape[0])
    for y in seq:
        out = out * probs[:, y]
    return out


def enum_cond_div(
    phi: ParamPoint,
    grid: ParamGrid,
    prior: Prior,
    N: int,
    L: int = 1,
    limit: OracleLimit = DEFAULT_LIMIT,
) -> float:
    """sum over y^{N+L-1} of P_phi(y) log(P_phi(future | past) / Q_pi(future | past))."""
    if N < 1 or L < 1:
        raise ValueError("N and L must be at least 1")
    A = grid.alphabet_size
    length = N + L - 1
    limit.check(A, length)
    prior.check_aligned(grid)
    pi = prior.weights
    p = phi.as_array()
    total = 0.0
    for seq in itertools.product(range(A), repeat=length):
        past, future = seq[: N - 1], seq[N - 1:]
        p_past = math.prod(p[y] for y in past)
        p_future = math.prod(p[y] for y in future)
        if p_past * p_future == 0.0:
            continue
        mix_past = float(np.dot(pi, _seq_probs(grid.probs, past)))
        if mix_past == 0.0:
            continue
        mix_full = float(np.dot(pi, _seq_probs(grid.probs, seq)))
        if mix_full == 0.0:
            return math.inf
        total += p_past * p_future * math.log(p_future * mix_past / mix_full)
    return total


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    total = 0.0
    for a, b in zip(p, q, strict=True):
        if a > 0:
            if b == 0:
                return math.inf
            total += a * math.log(a / b)
    return total


def enum_div_to_set(phi: ParamPoint, theta: HypothesisSet) -> float:
    """inf over Θ of KL by direct search; scalar minimization for intervals."""
    p = phi.as_array()
    if theta.contains(phi):
        return 0.0
    if not theta.is_interval:
        return min(_kl(p, q) for q in theta.subgrid.probs)
    a, b = theta.interval

    def f(t: float) -> float:
        return _kl(p, np.array([1.0 - t, t]))

    candidates = [f(a), f(b)]
    if a < b:
        res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        candidates.append(float(res.fun))
    return max(min(candidates), 0.0)


def enum_regret_terms(
    grid: ParamGrid,
    prior: Prior,
    theta: HypothesisSet,
    N: int,
    L: int = 1,
    limit: OracleLimit = DEFAULT_LIMIT,
) -> OracleTerms:
    to_predictor = np.array([enum_cond_div(grid.point(j), grid, prior, N, L, limit)
                             for j in range(len(grid))])
    to_set = np.array([L * enum_div_to_set(grid.point(j), theta) for j in range(len(grid))])
    d = to_predictor - to_set
    live = prior.weights > 0
    return OracleTerms(
        to_predictor=to_predictor,
        to_set=to_set,
        r_low=float(np.dot(prior.weights[live], d[live])) / L,
        r_high=float(d.max()) / L,
    )


def enum_supervised(
    grid: ChannelGrid,
    prior: Prior,
    theta: ProductHypothesis,
    px: FeatureDist,
    N: int,
    limit: OracleLimit = DEFAULT_LIMIT,
) -> SupTerms:
    """Supervised objective terms by enumerating every (x^N, y^N)."""
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    Y = grid.label_size
    limit.check(2 * Y, N, supervised=True)
    if len(prior) != len(grid):
        raise ValueError("prior does not match the channel grid")
    ch = grid.probs
    pi = prior.weights
    fx = px.as_array()
    to_predictor = np.zeros(len(grid))
    pairs = list(itertools.product(range(2), range(Y)))
    for seq in itertools.product(pairs, repeat=N):
        p_x = math.prod(fx[x] for x, _ in seq)
        if p_x == 0.0:
            continue
        lik_past = np.ones(len(grid))
        for x, y in seq[:-1]:
            lik_past = lik_past * ch[:, x, y]
        x_n, y_n = seq[-1]
        lik_full = lik_past * ch[:, x_n, y_n]
        mix_past = float(np.dot(pi, lik_past))
        if mix_past == 0.0:
            continue
        mix_full = float(np.dot(pi, lik_full))
        for j in range(len(grid)):
            w = p_x * lik_full[j]
            if w == 0.0:
                continue
            if mix_full == 0.0:
                to_predictor[j] = math.inf
                continue
            to_predictor[j] += w * math.log(ch[j, x_n, y_n] * mix_past / mix_full)
    to_set = np.zeros(len(grid))
    for j in range(len(grid)):
        point = grid.point(j)
        to_set[j] = sum(
            p * enum_div_to_set(point.row(x), theta.rows[x]) for x, p in enumerate(px.probs) if p > 0
        )
    d = to_predictor - to_set
    live = pi > 0
    return SupTerms(
        mutual_info=float(np.dot(pi[live], to_predictor[live])),
        penalty=float(np.dot(pi[live], to_set[live])),
        r_low=float(np.dot(pi[live], d[live])),
        r_high=float(d.max()),
    )
