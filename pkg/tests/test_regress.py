import numpy as np
import pytest
from hypothesis import given, strategies as st

from bermudan.regress import (ContinuationEstimate, empirical_risk, evaluate, fit_least_squares,
                              min_norm_lstsq, truncate)
from bermudan.spline import SplineParams, SplineSpace


def space(degree=1, alpha=1.0, d=1, bound=2.0):
    return SplineSpace(SplineParams(degree, alpha), d, bound)


@pytest.mark.parametrize("z,expected", [(7, 5), (-7, -5), (3, 3)])
def test_truncate(z, expected):
    assert truncate(5, z) == expected


@given(st.floats(0.01, 1e6), st.floats(-1e9, 1e9))
def test_truncate_band(level, z):
    out = truncate(level, z)
    assert -level <= out <= level
    if -level <= z <= level:
        assert out == z


def test_single_cell_recovers_mean():
    s = space(0, 4.0, bound=2.0)          # cells [-4, 0) and [0, 4)
    xs = np.random.default_rng(0).uniform(0.1, 1.9, (60, 1))
    ys = np.random.default_rng(1).normal(3.0, 1.0, 60)
    est = fit_least_squares(s, xs, ys)
    np.testing.assert_allclose(est(xs), ys.mean(), rtol=1e-12)


def test_exact_representation_has_zero_risk():
    s = space(2, 0.5, bound=2.0)
    rng = np.random.default_rng(2)
    truth = ContinuationEstimate(s, rng.normal(size=s.dimension))
    xs = rng.uniform(-2, 2, (300, 1))
    est = fit_least_squares(s, xs, truth(xs))
    assert empirical_risk(est, xs, truth(xs)) < 1e-10


def random_problem(seed=3, n=50):
    s = space(1, 1.0, bound=2.0)          # 5 hat functions
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-2, 2, (n, 1))
    ys = np.sin(2 * xs[:, 0]) + rng.normal(0, 0.3, n)
    return s, xs, ys


def test_matches_dense_normal_equations():
    s, xs, ys = random_problem()
    assert s.dimension == 5
    B = s.basis_eval(xs).toarray()
    coef = np.linalg.solve(B.T @ B, B.T @ ys)
    est = fit_least_squares(s, xs, ys)
    np.testing.assert_allclose(est(xs), B @ coef, atol=1e-8)


def test_residual_orthogonal_to_columns():
    s = space(2, 0.5, d=2, bound=2.0)
    rng = np.random.default_rng(4)
    xs = rng.uniform(-2, 2, (3000, 2))
    ys = np.cos(xs[:, 0]) * xs[:, 1] + rng.normal(0, 0.1, 3000)
    est = fit_least_squares(s, xs, ys)
    B = s.basis_eval(xs)
    resid = ys - B @ est.coeffs
    cols = np.sqrt(np.asarray(B.multiply(B).sum(axis=0)).ravel())
    used = cols > 0
    rel = np.abs(B.T @ resid)[used] / (cols[used] * np.linalg.norm(resid))
    assert rel.max() < 1e-8


def test_risk_is_locally_and_globally_minimal():
    s, xs, ys = random_problem(5, 200)
    est = fit_least_squares(s, xs, ys)
    base = empirical_risk(est, xs, ys)
    rng = np.random.default_rng(6)
    for _ in range(100):
        step = rng.normal(size=est.coeffs.size)
        step *= 1e-3 / np.linalg.norm(step)
        assert base <= empirical_risk(ContinuationEstimate(s, est.coeffs + step), xs, ys)
    B = s.basis_eval(xs).toarray()
    oracle, *_ = np.linalg.lstsq(B, ys, rcond=None)
    assert base <= np.mean((B @ oracle - ys) ** 2) + 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_truncation_never_increases_risk_for_bounded_labels(seed):
    rng = np.random.default_rng(seed)
    s = space(2, 0.25, bound=2.0)
    level = 1.0
    xs = rng.uniform(-2, 2, (40, 1))
    ys = rng.uniform(-level, level, 40)
    raw = fit_least_squares(s, xs, ys)
    cut = ContinuationEstimate(s, raw.coeffs, level)
    xe = rng.uniform(-2, 2, (500, 1))
    ye = rng.uniform(-level, level, 500)
    assert empirical_risk(cut, xe, ye) <= empirical_risk(raw, xe, ye)


def test_rank_deficient_gives_minimum_norm():
    s = space(0, 0.5, bound=2.0)           # 8 cells, data in only 3 of them
    xs = np.array([[0.1], [0.2], [0.6], [1.3], [1.4]])
    ys = np.array([1.0, 3.0, 5.0, 2.0, 4.0])
    est = fit_least_squares(s, xs, ys)
    B = s.basis_eval(xs).toarray()
    np.testing.assert_allclose(est.coeffs, np.linalg.pinv(B) @ ys, atol=1e-12)
    assert np.count_nonzero(est.coeffs) == 3


def test_collinear_dense_columns_minimum_norm():
    B = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([1.0, 2.0, 3.1])
    np.testing.assert_allclose(min_norm_lstsq(B, y), np.linalg.pinv(B) @ y, atol=1e-12)


def test_multiple_label_sets_fit_separately():
    s, xs, ys = random_problem()
    both = fit_least_squares(s, xs, np.column_stack([ys, 2 * ys]))
    single = fit_least_squares(s, xs, ys)
    np.testing.assert_allclose(both[0].coeffs, single.coeffs, atol=1e-12)
    np.testing.assert_allclose(both[1].coeffs, 2 * single.coeffs, atol=1e-12)


def test_fit_errors():
    s = space()
    with pytest.raises(ValueError):
        fit_least_squares(s, np.empty((0, 1)), np.empty(0))
    with pytest.raises(ValueError):
        fit_least_squares(s, [[0.0]], [np.nan])


def test_evaluate_examples():
    s = space(2, 0.5, bound=3.0)
    x = np.linspace(-2, 2, 9)[:, None]
    assert np.all(evaluate(ContinuationEstimate(s, np.zeros(s.dimension), 5.0), x) == 0)
    # constant reproduction on the interior [-A + M alpha, A - M alpha]
    c = ContinuationEstimate(s, np.full(s.dimension, 3.5), 5.0)
    np.testing.assert_allclose(evaluate(c, x), 3.5, rtol=1e-14)
    hat = SplineSpace(SplineParams(1, 1.0), 1, 2.0)
    coeffs = np.zeros(hat.dimension)
    coeffs[list(hat.active_indices[:, 0]).index(0)] = 10 * 4.0   # B_{0,1} peaks at x = 1
    assert evaluate(ContinuationEstimate(hat, coeffs, 4.0), [[1.0]])[0] == 4.0


def test_empirical_risk_examples():
    xs = np.zeros((4, 1))
    ys = np.array([1.0, 2.0, 4.0, -1.0])
    assert empirical_risk(lambda x: np.full(len(x), 1.5), xs, ys) == pytest.approx(
        np.mean((1.5 - ys) ** 2))
    assert empirical_risk(lambda x: ys.copy(), xs, ys) == 0.0
    s, xs, ys = random_problem()
    est = fit_least_squares(s, xs, ys)
    perm = np.random.default_rng(0).permutation(len(ys))
    assert empirical_risk(est, xs[perm], ys[perm]) == pytest.approx(empirical_risk(est, xs, ys),
                                                                    rel=1e-13)
