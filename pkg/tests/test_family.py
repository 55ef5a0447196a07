import math

import numpy as np
import pytest

from src.family import (
    Alphabet,
    HypothesisSet,
    ParamGrid,
    ParamPoint,
    SuffStat,
    box_subgrid,
    count_classes,
    default_resolution,
    epsilon_n,
    log_count_weight,
    log_count_weights,
    make_simplex_grid,
    make_uniform_grid,
    theta_epsilon,
)

# ── Grids ─────────────────────────────────────────────────────────────────


def test_uniform_grid_three_points():
    grid = make_uniform_grid(0.0, 1.0, 3)
    assert grid.success.tolist() == [0.0, 0.5, 1.0]
    assert grid.probs[:, 0].tolist() == [1.0, 0.5, 0.0]


def test_uniform_grid_degenerate_range():
    grid = make_uniform_grid(0.25, 0.25, 1)
    assert len(grid) == 1
    assert grid.point(0) == ParamPoint.bernoulli(0.25)


def test_uniform_grid_spacing():
    grid = make_uniform_grid(0.25, 0.75, 1001)
    p = grid.success
    assert len(grid) == 1001
    assert p[0] == 0.25 and p[-1] == 0.75
    assert np.allclose(np.diff(p), 5e-4, atol=1e-15)


@pytest.mark.parametrize("lo,hi,M", [(0.0, 1.0, 0), (0.6, 0.4, 5), (0.0, 1.0, 1), (-0.1, 0.5, 3)])
def test_uniform_grid_rejects_bad_input(lo, hi, M):
    with pytest.raises(ValueError):
        make_uniform_grid(lo, hi, M)


def test_grids_are_deterministic_and_read_only():
    a = make_uniform_grid(0.1, 0.9, 101)
    b = make_uniform_grid(0.1, 0.9, 101)
    assert np.array_equal(a.probs, b.probs)
    with pytest.raises(ValueError):
        a.probs[0, 0] = 0.5


def test_param_grid_validation():
    with pytest.raises(ValueError, match="ascending"):
        ParamGrid(np.array([[0.2, 0.8], [0.6, 0.4]]), 0.0, 1.0)
    with pytest.raises(ValueError, match="distinct"):
        ParamGrid(np.array([[0.5, 0.5], [0.5, 0.5]]), 0.0, 1.0)
    with pytest.raises(ValueError, match="outside"):
        ParamGrid(np.array([[0.9, 0.1], [0.5, 0.5]]), 0.2, 1.0)


def test_default_resolution():
    assert default_resolution(100) == 1001
    assert default_resolution(200) == 1001
    assert default_resolution(1000) == 2001


def test_simplex_grid_and_box_subgrid():
    grid = make_simplex_grid(3, 4)
    assert len(grid) == math.comb(6, 2) == 15
    assert np.allclose(grid.probs.sum(axis=1), 1.0)
    inner = box_subgrid(grid, 0.25, 0.5)
    assert np.all(inner.probs >= 0.25) and np.all(inner.probs <= 0.5)
    assert len(inner) == 3  # permutations of (0.25, 0.25, 0.5)


def test_box_subgrid_rejects_empty_box():
    with pytest.raises(ValueError):
        box_subgrid(make_simplex_grid(3, 2), 0.4, 0.45)


# ── Points, sets and statistics ───────────────────────────────────────────


def test_param_point_validation():
    with pytest.raises(ValueError):
        ParamPoint((0.5, 0.6))
    with pytest.raises(ValueError):
        ParamPoint((1.2, -0.2))
    assert ParamPoint.bernoulli(0.3).p == 0.3


def test_alphabet_needs_two_symbols():
    with pytest.raises(ValueError):
        Alphabet(1)


def test_hypothesis_set():
    theta = HypothesisSet.between(0.25, 0.75)
    assert theta.contains(ParamPoint.bernoulli(0.5))
    assert not theta.contains(ParamPoint.bernoulli(0.1))
    assert theta.within(0.0, 1.0)
    assert not theta.within(0.3, 1.0)
    with pytest.raises(ValueError):
        HypothesisSet.between(0.7, 0.3)
    with pytest.raises(ValueError):
        HypothesisSet()


def test_suff_stat():
    stat = SuffStat.bernoulli(ones=2, trials=5)
    assert stat.counts == (3, 2)
    assert stat.trials == 5
    with pytest.raises(ValueError):
        SuffStat((-1, 3))


def test_count_classes_binary_order():
    assert count_classes(2, 3).tolist() == [[3, 0], [2, 1], [1, 2], [0, 3]]
    assert len(count_classes(4, 5)) == math.comb(8, 3)


# ── Likelihoods ───────────────────────────────────────────────────────────


def test_log_count_weight_examples():
    assert log_count_weight(ParamPoint.bernoulli(0.5), SuffStat((1, 1))) == pytest.approx(math.log(0.5))
    assert log_count_weight(ParamPoint.bernoulli(0.0), SuffStat((5, 0))) == 0.0
    assert log_count_weight(ParamPoint.bernoulli(0.3), SuffStat((1, 2))) == pytest.approx(math.log(0.189))


def test_log_count_weight_impossible_class():
    assert log_count_weight(ParamPoint.bernoulli(0.0), SuffStat((4, 1))) == -math.inf


@pytest.mark.parametrize("n", [0, 1, 7, 50, 200])
def test_count_weights_sum_to_one(n):
    rng = np.random.default_rng(n)
    p = np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 6)])
    probs = np.column_stack([1.0 - p, p])
    total = np.exp(log_count_weights(probs, count_classes(2, n))).sum(axis=1)
    assert np.allclose(total, 1.0, atol=1e-12, rtol=0)


def test_multinomial_count_weights_sum_to_one():
    probs = np.array([[0.2, 0.3, 0.5], [0.0, 0.4, 0.6]])
    total = np.exp(log_count_weights(probs, count_classes(3, 12))).sum(axis=1)
    assert np.allclose(total, 1.0, atol=1e-12, rtol=0)


# ── Hypothesis extension ──────────────────────────────────────────────────


def test_theta_epsilon_large_batch():
    theta = HypothesisSet.between(0.25, 0.75)
    a, b = theta_epsilon(theta, epsilon_n(1000, 0.1), (0.0, 1.0)).interval
    assert 0.25 - a == pytest.approx(0.0274, abs=1e-4)
    assert b - 0.75 == pytest.approx(0.0274, abs=1e-4)


def test_theta_epsilon_small_batch():
    theta = HypothesisSet.between(0.25, 0.75)
    a, _ = theta_epsilon(theta, epsilon_n(100, 0.1), (0.0, 1.0)).interval
    assert 0.25 - a == pytest.approx(0.0771, abs=1e-4)


def test_theta_epsilon_zero_and_clipping():
    theta = HypothesisSet.between(0.2, 0.6)
    assert theta_epsilon(theta, 0.0, (0.0, 1.0)).interval == (0.2, 0.6)
    assert theta_epsilon(theta, 0.5, (0.15, 0.65)).interval == (0.15, 0.65)


def test_theta_epsilon_is_monotone():
    theta = HypothesisSet.between(0.3, 0.45)
    previous = theta.interval
    for eps in [1e-4, 1e-3, 1e-2, 1e-1]:
        a, b = theta_epsilon(theta, eps, (0.0, 1.0)).interval
        assert a <= previous[0] and b >= previous[1]
        previous = (a, b)


def test_epsilon_n_range():
    assert epsilon_n(1000, 0.1) == pytest.approx(1000 ** -0.9)
    with pytest.raises(ValueError):
        epsilon_n(100, 1.0)
