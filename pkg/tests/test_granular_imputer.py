import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from granimpute.data_model import build_mask, from_matrix
from granimpute.granular_imputer import (FALLBACK_MEAN, FALLBACK_NONE, FALLBACK_ZERO, OK,
                                         REGULARIZED, LocalModel, estimate_cell, fit_local,
                                         impute_cell, impute_table)
from granimpute.granule import Granule, GranuleSpec
from granimpute.semantics import SemanticFeatureSet, correlation_matrix

from conftest import CA, TL, TOY_VALUES, WC, affine_table


def granule(X, y):
    block = np.column_stack([X, y])
    d = X.shape[1]
    feats = SemanticFeatureSet(d, tuple(range(d)), (1.0,) * d)
    spec = GranuleSpec(len(y), d, feats, tuple(range(len(y))))
    return Granule(spec, block)


def test_exact_linear_fit():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(7, 2))
    m = fit_local(granule(X, 3 * X[:, 0] - 2 * X[:, 1] + 1))
    np.testing.assert_allclose(m.coefficients, [3, -2], atol=1e-9)
    assert abs(m.intercept - 1) < 1e-9
    assert m.condition_flag == OK


def test_constant_predictor_gets_zero_coefficient():
    X = np.array([[1.0, 4.0], [2.0, 4.0], [3.0, 4.0], [4.0, 4.0], [5.0, 4.0]])
    y = np.array([2.0, 1.0, 4.0, 3.0, 5.0])
    m = fit_local(granule(X[:, 1:], y))
    # single constant predictor: ridge solution is coefficient 0, intercept mean(y) = 15/5
    assert m.coefficients[0] == 0.0
    assert m.intercept == pytest.approx(3.0, abs=1e-12)
    assert m.condition_flag == REGULARIZED
    m2 = fit_local(granule(X, y))
    # with the informative column the constant one still contributes nothing;
    # slope of y on x alone: cov = 1.6, var = 2 -> 0.8, intercept 3 - 0.8 * 3 = 0.6
    assert m2.coefficients[1] == 0.0
    assert m2.coefficients[0] == pytest.approx(0.8, rel=1e-6)
    assert m2.intercept == pytest.approx(0.6, rel=1e-6)


def test_two_point_line():
    m = fit_local(granule(np.array([[0.0], [1.0]]), np.array([0.0, 1.0])))
    assert m.coefficients[0] == pytest.approx(1.0, abs=1e-5)
    assert m.intercept == pytest.approx(0.0, abs=1e-5)
    assert m.condition_flag == REGULARIZED  # fewer than delta + 2 rows


def test_collinear_predictors_are_regularized():
    rng = np.random.default_rng(3)
    x = rng.normal(size=7)
    m = fit_local(granule(np.column_stack([x, 2 * x]), 5 * x + 1))
    assert m.condition_flag == REGULARIZED
    assert np.all(np.isfinite(m.coefficients))
    pred = m.coefficients[0] * x + m.coefficients[1] * 2 * x + m.intercept
    np.testing.assert_allclose(pred, 5 * x + 1, atol=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 6))
def test_least_squares_matches_pseudo_inverse(seed, d, extra):
    rng = np.random.default_rng(seed)
    n = d + 2 + extra
    X = rng.normal(size=(n, d)) * rng.uniform(0.1, 10, size=d) + rng.normal(size=d)
    y = rng.normal(size=n)
    m = fit_local(granule(X, y))
    A = np.column_stack([X, np.ones(n)])
    sol = np.linalg.pinv(A) @ y
    ref = np.r_[m.coefficients, m.intercept]
    assert m.condition_flag == OK
    assert np.linalg.norm(ref - sol) <= 1e-8 * max(np.linalg.norm(sol), 1e-12)


def test_estimate_cell_plug_in():
    t = from_matrix(np.array([[2.0, 1.0, np.nan]]))
    spec = GranuleSpec(0, 2, SemanticFeatureSet(2, (0, 1), (1, 1)), ())
    assert estimate_cell(t, spec, LocalModel(np.array([3.0, -2.0]), 1.0)) == 5.0
    assert estimate_cell(t, spec, LocalModel(np.zeros(2), 7.5)) == 7.5


def test_toy_estimate_matches_hand_solution(toy_table):
    mask = build_mask(toy_table)
    corr = correlation_matrix(toy_table, mask)
    value, prov = impute_cell(toy_table, mask, corr, 5, TL, delta=2, eta=2)
    assert prov.rows == (4, 2)
    assert set(prov.features) == {WC, CA}
    assert prov.condition_flag == REGULARIZED
    # Two rows r1=5, r2=3 (1-based). In the ridge -> 0 limit the minimum-norm fit
    # on centred, unit-norm predictors gives
    #   y_hat = mean(y) + (y1 - y2)/2 * sum_j (x_aj - mean_j) / (x1j - x2j)
    r1, r2, a = TOY_VALUES[4], TOY_VALUES[2], TOY_VALUES[5]
    dy = r1[TL] - r2[TL]
    t_sum = sum((a[j] - (r1[j] + r2[j]) / 2) / (r1[j] - r2[j]) for j in (WC, CA))
    expected = (r1[TL] + r2[TL]) / 2 + dy / 2 * t_sum
    assert value == pytest.approx(expected, rel=1e-5)


def test_zero_missing_returns_identical_table(affine_matrix):
    t = from_matrix(affine_matrix)
    out = impute_table(t)
    assert out.provenance == []
    np.testing.assert_array_equal(out.table.to_matrix(), affine_matrix)


def test_single_cell_exact_recovery():
    X = affine_table(n=200, d=6, coefs=(3.0, -2.0), target=2)
    truth = X[100, 2]
    X[100, 2] = np.nan
    out = impute_table(from_matrix(X), delta=5, eta=7)
    assert abs(out.table.to_matrix()[100, 2] - truth) < 1e-6


def test_bulk_recovery_and_passthrough():
    X = affine_table(n=1000, d=10, seed=4)
    rng = np.random.default_rng(4)
    rows = rng.choice(1000, 100, replace=False)
    truth = X[rows, 3].copy()
    X[rows, 3] = np.nan
    X[rng.choice(1000, 30), 7] = np.nan
    out = impute_table(from_matrix(X))
    Y = out.table.to_matrix()
    assert np.max(np.abs(Y[rows, 3] - truth)) < 1e-6
    present = ~np.isnan(X)
    assert np.array_equal(Y[present].view(np.int64), X[present].view(np.int64))
    assert np.all(np.isfinite(Y))
    assert all(p.fallback == FALLBACK_NONE for p in out.provenance)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.02, 0.3))
def test_order_independence(seed, rate):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 6)) @ rng.normal(size=(6, 6))
    X[rng.random(X.shape) < rate] = np.nan
    t = from_matrix(X)
    fwd = impute_table(t)
    rev = impute_table(t, reverse=True)
    assert np.array_equal(fwd.table.to_matrix(), rev.table.to_matrix())
    assert fwd.provenance == rev.provenance
    assert np.all(np.isfinite(fwd.table.to_matrix()))


def test_label_column_untouched():
    X = affine_table(n=50, d=4)
    X[3, 0] = np.nan
    X[:, 3] = np.arange(50) % 2
    X[5, 3] = np.nan
    out = impute_table(from_matrix(X, label_col=3))
    assert np.isnan(out.table.to_matrix()[5, 3])
    assert [(p.alpha, p.beta) for p in out.provenance] == [(3, 0)]


# -- degenerate inputs -------------------------------------------------------------

def test_row_missing_all_other_features_uses_column_mean():
    X = affine_table(n=30, d=4)
    X[7, :] = np.nan
    out = impute_table(from_matrix(X))
    Y = out.table.to_matrix()
    for p in out.provenance:
        assert p.fallback == FALLBACK_MEAN
        assert Y[7, p.beta] == pytest.approx(np.nanmean(X[:, p.beta]))


def test_single_observed_value_spreads():
    X = np.random.default_rng(0).normal(size=(12, 3))
    X[:, 1] = np.nan
    X[4, 1] = 2.5
    out = impute_table(from_matrix(X))
    np.testing.assert_array_equal(out.table.to_matrix()[:, 1], 2.5)
    assert {p.fallback for p in out.provenance} == {FALLBACK_MEAN}


def test_all_missing_column_filled_with_zero():
    X = np.random.default_rng(0).normal(size=(10, 3))
    X[:, 2] = np.nan
    out = impute_table(from_matrix(X))
    np.testing.assert_array_equal(out.table.to_matrix()[:, 2], 0.0)
    assert {p.fallback for p in out.provenance} == {FALLBACK_ZERO}


def test_constant_columns_and_tiny_tables():
    X = np.array([[1.0, 5.0, 2.0], [2.0, 5.0, np.nan], [3.0, 5.0, 6.0]])
    out = impute_table(from_matrix(X), delta=5, eta=7)
    assert np.all(np.isfinite(out.table.to_matrix()))
    assert out.provenance[0].fallback == FALLBACK_MEAN
    assert "underfull" in out.provenance[0].reason


def test_delta_reduced_when_predictors_missing():
    X = affine_table(n=100, d=6, seed=2)
    X[50, [3, 4, 5]] = np.nan
    out = impute_table(from_matrix(X), delta=5, eta=7)
    p = next(p for p in out.provenance if p.beta == 3)
    assert len(p.features) < 5
    assert p.reason.startswith("delta reduced")


def test_single_category_column_imputes():
    X = np.random.default_rng(0).normal(size=(20, 3))
    X[:, 2] = 1.0
    X[[3, 9], 2] = np.nan
    out = impute_table(from_matrix(X))
    np.testing.assert_array_equal(out.table.to_matrix()[[3, 9], 2], 1.0)


def test_parameter_validation():
    t = from_matrix(np.ones((3, 2)))
    for kw in ({"delta": 0}, {"eta": 1}, {"delta": 10, "eta": 10}):
        with pytest.raises(ValueError):
            impute_table(t, **kw)


def test_impute_cell_requires_missing_cell():
    X = affine_table(n=20, d=4)
    t = from_matrix(X)
    mask = build_mask(t)
    with pytest.raises(ValueError):
        impute_cell(t, mask, correlation_matrix(t, mask), 0, 0)
