import math

import numpy as np
import pytest
from scipy.special import rel_entr

from src.divergence import (
    SATURATION,
    DivergenceProfile,
    cond_div_to_predictor,
    div_to_set,
    divergence_profile,
    kl_single,
    mutual_info,
    set_penalties,
    unsaturate,
)
from src.family import HypothesisSet, ParamGrid, ParamPoint, make_simplex_grid, make_uniform_grid
from src.oracle import enum_cond_div, enum_regret_terms
from src.predictor import MixtureKernel, Prior, predictive_from_prior

B = ParamPoint.bernoulli


def _random_case(rng: np.random.Generator, M: int) -> tuple[ParamGrid, Prior]:
    p = np.sort(rng.uniform(0.0, 1.0, M))
    grid = ParamGrid(np.column_stack([1.0 - p, p]), float(p[0]), float(p[-1]))
    return grid, Prior.normalized(rng.dirichlet(np.ones(M)))


# ── Single-symbol ─────────────────────────────────────────────────────────


def test_kl_single_examples():
    assert kl_single(B(0.5), B(0.5)) == 0.0
    assert kl_single(B(0.5), B(0.25)) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 / 3))
    assert kl_single(B(0.0), B(0.25)) == pytest.approx(math.log(1 / 0.75))
    assert kl_single(B(0.5), B(0.0)) == math.inf


def test_div_to_set_examples():
    theta = HypothesisSet.between(0.25, 0.75)
    assert div_to_set(B(0.5), theta) == 0.0
    assert div_to_set(B(0.1), theta) == pytest.approx(0.0724, abs=1e-4)
    assert div_to_set(B(0.1), theta) == kl_single(B(0.1), B(0.25))
    assert div_to_set(B(0.0), theta) == pytest.approx(0.2877, abs=1e-4)


def test_points_inside_interval_have_exactly_zero_penalty():
    # 1 - 0.9 is not 0.1 in floating point.
    phi = ParamPoint((0.1, 0.9))
    assert div_to_set(phi, HypothesisSet.between(0.5, 1.0)) == 0.0
    grid = ParamGrid(np.array([[0.9, 0.1], [0.7, 0.3], [0.1, 0.9]]), 0.1, 0.9)
    penalties = set_penalties(grid, HypothesisSet.between(0.3, 0.9))
    assert penalties[1:].tolist() == [0.0, 0.0]
    assert penalties[0] == pytest.approx(kl_single(grid.point(0), B(0.3)))


def test_clamp_projection_matches_dense_minimization():
    rng = np.random.default_rng(7)
    for _ in range(25):
        a, b = np.sort(rng.uniform(0.01, 0.99, 2))
        phi = B(float(rng.uniform(0, 1)))
        t = np.linspace(a, b, 20001)
        dense = rel_entr(phi.as_array()[None, :], np.column_stack([1.0 - t, t])).sum(axis=1)
        projected = div_to_set(phi, HypothesisSet.between(float(a), float(b)))
        assert projected <= dense.min() + 1e-12
        assert projected == pytest.approx(dense.min(), abs=1e-6)


def test_subgrid_projection_takes_the_minimum():
    sub = make_uniform_grid(0.2, 0.4, 3)
    theta = HypothesisSet.from_grid(sub)
    expected = min(kl_single(B(0.7), sub.point(j)) for j in range(3))
    assert div_to_set(B(0.7), theta) == pytest.approx(expected)
    assert div_to_set(B(0.3), theta) == 0.0


def test_multinomial_subgrid_penalties():
    grid = make_simplex_grid(3, 6)
    theta = HypothesisSet.from_grid(grid)
    assert np.all(set_penalties(grid, theta) == 0.0)


# ── Divergence to the predictor ───────────────────────────────────────────


def test_point_mass_predictor_has_zero_divergence():
    grid = make_uniform_grid(0.1, 0.9, 9)
    table = predictive_from_prior(grid, Prior.point_mass(9, 3), N=12)
    assert cond_div_to_predictor(grid.point(3), table, 12) == pytest.approx(0.0, abs=1e-12)


def test_empty_history_reduces_to_single_symbol_kl():
    grid = make_uniform_grid(0.2, 0.8, 3)
    table = predictive_from_prior(grid, Prior.uniform(3), N=1)
    mean = ParamPoint(tuple(table.probs[0]))
    assert cond_div_to_predictor(B(0.3), table, 1) == pytest.approx(kl_single(B(0.3), mean), abs=1e-12)


def test_cond_div_matches_enumeration():
    grid = make_uniform_grid(0.2, 0.8, 3)
    prior = Prior.uniform(3)
    table = predictive_from_prior(grid, prior, N=6)
    assert cond_div_to_predictor(B(0.3), table, 6) == pytest.approx(
        enum_cond_div(B(0.3), grid, prior, 6), abs=1e-10
    )


@pytest.mark.parametrize("seed", range(10))
def test_cond_div_matches_enumeration_randomized(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, 13))
    grid, prior = _random_case(rng, int(rng.integers(2, 6)))
    phi = B(float(rng.uniform(0, 1)))
    table = predictive_from_prior(grid, prior, N)
    assert cond_div_to_predictor(phi, table, N) == pytest.approx(
        enum_cond_div(phi, grid, prior, N), abs=1e-10
    )


def test_horizon_mismatch_is_rejected():
    grid = make_uniform_grid(0, 1, 5)
    table = predictive_from_prior(grid, Prior.uniform(5), N=4)
    with pytest.raises(ValueError):
        cond_div_to_predictor(B(0.5), table, 5)


def test_mutual_info_examples():
    grid = make_uniform_grid(0, 1, 2)
    prior = Prior.uniform(2)
    table = predictive_from_prior(grid, prior, N=1)
    assert mutual_info(grid, prior, table, 1) == pytest.approx(math.log(2), abs=1e-12)

    grid = make_uniform_grid(0.1, 0.9, 5)
    point = Prior.point_mass(5, 2)
    assert mutual_info(grid, point, predictive_from_prior(grid, point, 8), 8) == pytest.approx(0.0, abs=1e-12)


def test_mutual_info_is_prior_average_of_divergences():
    rng = np.random.default_rng(21)
    grid, prior = _random_case(rng, 7)
    table = predictive_from_prior(grid, prior, 15)
    per_point = [cond_div_to_predictor(grid.point(j), table, 15) for j in range(len(grid))]
    assert mutual_info(grid, prior, table, 15) == pytest.approx(
        float(np.dot(prior.weights, per_point)), abs=1e-12
    )


def test_divergences_are_nonnegative():
    rng = np.random.default_rng(3)
    for _ in range(20):
        grid, prior = _random_case(rng, int(rng.integers(2, 30)))
        N = int(rng.integers(1, 60))
        theta = HypothesisSet.between(*sorted(rng.uniform(grid.lo, grid.hi, 2)))
        profile = divergence_profile(grid, prior, theta, N)
        assert np.all(profile.to_predictor >= 0)
        assert np.all(profile.to_set >= 0)


def test_zero_predictor_probability_gives_infinity():
    # Prior on the two degenerate coins only; phi = 0.5 sees Q(1 | k=0) = 0.
    grid = make_uniform_grid(0, 1, 3)
    prior = Prior(np.array([0.5, 0.0, 0.5]))
    kernel = MixtureKernel.for_grid(grid, 2)
    d = kernel.divergences(kernel.table(prior))
    assert d[1] == math.inf
    assert d[0] == pytest.approx(0.0, abs=1e-12)
    assert d[2] == pytest.approx(0.0, abs=1e-12)


# ── Profiles ──────────────────────────────────────────────────────────────


def test_stochastic_profile_has_zero_penalty():
    grid = make_uniform_grid(0, 1, 21)
    profile = divergence_profile(grid, Prior.uniform(21), HypothesisSet.from_grid(grid), 10)
    assert np.all(profile.to_set == 0.0)
    assert np.array_equal(profile.values, profile.to_predictor)


def test_profile_at_point_mass_inside_theta():
    grid = make_uniform_grid(0, 1, 11)
    profile = divergence_profile(grid, Prior.point_mass(11, 5), HypothesisSet.between(0.3, 0.7), 6)
    assert profile.values[5] == pytest.approx(0.0, abs=1e-12)


def test_profile_matches_enumeration():
    grid = make_uniform_grid(0.2, 0.8, 3)
    prior = Prior(np.array([0.2, 0.5, 0.3]))
    theta = HypothesisSet.from_grid(ParamGrid(grid.probs[1:2], 0.5, 0.5))
    profile = divergence_profile(grid, prior, theta, 5)
    ref = enum_regret_terms(grid, prior, theta, 5)
    assert np.allclose(profile.to_predictor, ref.to_predictor, atol=1e-10, rtol=0)
    assert np.allclose(profile.to_set, ref.to_set, atol=1e-10, rtol=0)


def test_saturation_round_trip():
    profile = DivergenceProfile(np.array([0.1, np.inf, 0.2]), np.array([0.0, 0.0, np.inf]))
    sat = profile.saturated()
    assert sat[1] == SATURATION and sat[2] == 0.2 - SATURATION
    values = profile.values
    assert values[0] == pytest.approx(0.1)
    assert values[1] == math.inf and values[2] == -math.inf
    assert unsaturate(5.0) == 5.0
