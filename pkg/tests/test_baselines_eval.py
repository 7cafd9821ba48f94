import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from granimpute.baselines_eval import (apply_mask, error_metric, impurity_sweep, knn_imputer,
                                       make_plan, mean_imputer, mice_lite_imputer,
                                       normalized_errors)
from granimpute.data_model import build_mask, from_matrix, standardize

from conftest import affine_table


def complete_table(n=100, d=10, seed=0):
    return from_matrix(np.random.default_rng(seed).normal(size=(n, d)))


def test_plan_count_and_determinism():
    t = complete_table()
    p1 = make_plan(t, 0.05, 7)
    assert len(p1.cells) == 50
    assert len(set(p1.cells)) == 50
    assert make_plan(t, 0.05, 7).cells == p1.cells
    assert make_plan(t, 0.05, 8).cells != p1.cells


def test_plan_single_cell():
    assert len(make_plan(complete_table(), 0.001, 0).cells) == 1


@pytest.mark.parametrize("rate", [0.0, 1.0, -0.1, 1.5])
def test_rate_out_of_range(rate):
    with pytest.raises(ValueError):
        make_plan(complete_table(), rate, 0)


def test_masking_avoids_missing_and_label():
    X = np.random.default_rng(0).normal(size=(50, 5))
    X[::3, 1] = np.nan
    X[:, 4] = np.arange(50) % 2
    t = from_matrix(X, label_col=4)
    plan = make_plan(t, 0.3, 1)
    for r, c in plan.cells:
        assert c != 4 and not np.isnan(X[r, c])
    masked, truth = apply_mask(t, plan)
    assert build_mask(masked).n_missing() == build_mask(t).n_missing() + len(plan.cells)
    np.testing.assert_array_equal(truth, [X[r, c] for r, c in plan.cells])


def test_error_metric_examples():
    col = np.array([0.0, 10.0, 5.0])
    assert error_metric(3.0, 3.0, col) == 0.0
    assert error_metric(4.0, 6.0, col) == pytest.approx(0.2)
    assert error_metric(2.0, 2.0, np.array([2.0, 2.0])) == 0.0
    assert error_metric(2.0, 3.0, np.array([2.0, 2.0])) == 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20), st.floats(-1e3, 1e3),
       st.floats(0.01, 100), st.floats(-100, 100))
def test_error_metric_affine_invariant(col, pred, a, b):
    col = np.array(col)
    truth = col[0]
    e1 = error_metric(truth, pred, col)
    e2 = error_metric(a * truth + b, a * pred + b, a * col + b)
    if np.ptp(col) > 1e-6:
        assert e1 >= 0 and math.isclose(e1, e2, rel_tol=1e-6, abs_tol=1e-9)


def test_normalized_errors_vectorized():
    err, flat = normalized_errors([1, 2, 3], [1, 4, 3.5], [1, 4, 0])
    np.testing.assert_allclose(err, [0, 0.5, 1])
    assert flat == 1


def test_mean_imputer():
    X = np.array([[1.0, np.nan], [3.0, 4.0], [np.nan, 6.0]])
    out = mean_imputer(from_matrix(X)).table.to_matrix()
    np.testing.assert_array_equal(out, [[1, 5], [3, 4], [2, 6]])


def test_knn_duplicate_row_donor():
    X = np.array([[1.0, 2.0, 3.0], [5.0, 1.0, 9.0], [1.0, 2.0, np.nan], [0.0, 7.0, -4.0]])
    X = np.vstack([X, [[1.0, 2.0, 42.0]]])
    out = knn_imputer(from_matrix(X), k=1).table.to_matrix()
    # rows 0 and 4 both duplicate row 2 on the shared features; lower index wins
    assert out[2, 2] == 3.0


def test_knn_all_rows_equals_mean_of_donors():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(15, 4))
    X[3, 2] = np.nan
    out = knn_imputer(from_matrix(X), k=100).table.to_matrix()
    assert out[3, 2] == pytest.approx(np.nanmean(X[:, 2]))


def test_knn_three_rows_brute_force():
    X = np.array([[0.0, 0.0, 1.0], [4.0, 10.0, 2.0], [1.0, np.nan, np.nan]])
    # ranges: col0 = 4, col1 = 10, col2 = 1. Row 2 shares only col0 with donors.
    # d(2, 0) = ((1 - 0) / 4)^2 = 0.0625, d(2, 1) = ((1 - 4) / 4)^2 = 0.5625
    out = knn_imputer(from_matrix(X), k=1).table.to_matrix()
    assert out[2, 1] == 0.0 and out[2, 2] == 1.0


def test_mice_recovers_linear_relation():
    X = affine_table(n=300, d=5, seed=1)
    truth = X[::10, 3].copy()
    X[::10, 3] = np.nan
    out = mice_lite_imputer(from_matrix(X)).table.to_matrix()
    assert np.max(np.abs(out[::10, 3] - truth)) < 1e-3


def test_imputers_deterministic():
    X = np.random.default_rng(5).normal(size=(40, 5))
    X[np.random.default_rng(6).random(X.shape) < 0.15] = np.nan
    t = from_matrix(X)
    for fn in (mean_imputer, knn_imputer, mice_lite_imputer):
        a = fn(t).table.to_matrix()
        b = fn(t).table.to_matrix()
        assert np.array_equal(a, b)
        assert np.all(np.isfinite(a))


def test_sweep_cross_product():
    t = from_matrix(affine_table(n=200, d=8, seed=3))
    reps = impurity_sweep(t, [0.05, 0.1, 0.2, 0.3], ["gs", "mean", "knn", "mice"], seed=42)
    assert len(reps) == 16
    assert {(r.rate, r.imputer) for r in reps} == {
        (a, b) for a in [0.05, 0.1, 0.2, 0.3] for b in ["gs", "mean", "knn", "mice"]}
    rec = reps[0].to_record()
    assert set(rec) == {"rate", "imputer", "n_cells", "mean_err", "median_err", "p90_err"}


def test_sweep_gs_exact_on_affine_data():
    # every column is an affine map of one latent factor, so any observed
    # feature in the seed row is an exact predictor
    rng = np.random.default_rng(11)
    z = rng.normal(size=(1000, 1))
    X = z * rng.uniform(0.5, 3, size=10) * rng.choice([-1, 1], size=10) + rng.normal(size=10)
    t = from_matrix(X)
    for rep in impurity_sweep(t, [0.01, 0.1, 0.3], ["gs", "mean"], seed=0):
        if rep.imputer == "gs":
            gs = rep
            assert rep.mean_err < 1e-6
        else:
            assert gs.mean_err < rep.mean_err


def test_sweep_mean_imputer_on_standardized_column():
    t, _ = standardize(complete_table(n=200, d=3, seed=9))
    rep = impurity_sweep(t, [0.1], ["mean"], seed=0)[0]
    X = t.to_matrix()
    ranges = np.ptp(X, axis=0)
    masked = apply_mask(t, make_plan(t, 0.1, 0))[0].to_matrix()
    for (r, c), e in zip(rep.cells, rep.errors):
        assert e == pytest.approx(abs(X[r, c] - np.nanmean(masked[:, c])) / ranges[c])


def test_sweep_unknown_imputer():
    with pytest.raises(ValueError):
        impurity_sweep(complete_table(), [0.1], ["fhdi"], seed=0)
