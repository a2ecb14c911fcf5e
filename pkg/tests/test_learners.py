import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fado.errors import FadoValidationError
from fado.evaluation import roc_auc
from fado.learners import (
    LOGISTIC,
    TREE_RANGES,
    TREES,
    LearnerSpec,
    fit,
    model_from_json,
    model_to_json,
    predict_proba,
    sample_grid,
)
from fado.learners.gbdt import fit_boosted_trees
from fado.learners.logistic import LogisticModel, loss_and_grad

SMALL_TREES = {"n_estimators": 30, "num_leaves": 10, "min_child_samples": 5, "max_depth": 4, "learning_rate": 0.2}


def noisy_data(n=400, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.5 * X[:, 1] + rng.normal(scale=1.0, size=n) > 0.3).astype(int)
    return X, y


def test_separable_points_get_perfect_auc():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(600, 2))
    X = X[np.abs(X[:, 0] + X[:, 1]) > 0.1][:200]
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    model = fit(LearnerSpec(LOGISTIC), X, y)
    assert roc_auc(predict_proba(model, X), y) == 1.0


def test_duplicate_row_equals_weight_two():
    X, y = noisy_data(300, seed=2)
    spec = LearnerSpec(TREES, SMALL_TREES)
    dup = 17
    Xd = np.vstack([X, X[dup]])
    yd = np.r_[y, y[dup]]
    w = np.ones(len(y))
    w[dup] = 2.0
    probe = np.random.default_rng(3).normal(size=(500, 3))
    a = predict_proba(fit(spec, Xd, yd), probe)
    b = predict_proba(fit(spec, X, y, w), probe)
    np.testing.assert_allclose(a, b, atol=1e-6, rtol=0)


@pytest.mark.parametrize("kind,hp", [(LOGISTIC, {}), (TREES, SMALL_TREES)])
def test_zero_weight_rows_have_no_influence(kind, hp):
    X, y = noisy_data(300, seed=4)
    spec = LearnerSpec(kind, hp)
    w = np.ones(len(y))
    w[::3] = 0.0
    keep = w > 0
    junk = X.copy()
    junk[~keep] = 1e6
    probe = np.random.default_rng(5).normal(size=(200, 3))
    a = predict_proba(fit(spec, X[keep], y[keep]), probe)
    b = predict_proba(fit(spec, junk, y, w), probe)
    np.testing.assert_allclose(a, b, atol=1e-9, rtol=0)


def test_single_class_after_weighting_rejected():
    X, y = noisy_data(100, seed=6)
    w = np.where(y == 1, 0.0, 1.0)
    with pytest.raises(FadoValidationError, match="single class"):
        fit(LearnerSpec(LOGISTIC), X, y, w)


@pytest.mark.parametrize("bad", [np.nan, np.inf, -1.0])
def test_invalid_weights_rejected(bad):
    X, y = noisy_data(50, seed=7)
    w = np.ones(len(y))
    w[0] = bad
    with pytest.raises(FadoValidationError):
        fit(LearnerSpec(LOGISTIC), X, y, w)


@pytest.mark.parametrize("kind,hp", [(LOGISTIC, {}), (TREES, SMALL_TREES)])
def test_dimension_mismatch_rejected(kind, hp):
    X, y = noisy_data(100, seed=8)
    model = fit(LearnerSpec(kind, hp), X, y)
    with pytest.raises(FadoValidationError):
        predict_proba(model, X[:, :2])


@pytest.mark.parametrize("kind,hp", [(LOGISTIC, {}), (TREES, SMALL_TREES)])
def test_constant_labels_collapse_to_prior(kind, hp):
    X, _ = noisy_data(100, seed=9)
    y = np.zeros(100, dtype=int)
    model = fit(LearnerSpec(kind, hp), X, y, allow_single_class=True)
    p = predict_proba(model, X)
    assert (p <= 1e-6).all() and (p >= 1e-12).all()


def test_zero_coefficients_give_one_half():
    m = LogisticModel(coef=np.zeros(3), intercept=0.0, mean=np.zeros(3), scale=np.ones(3))
    assert (predict_proba(m, np.random.default_rng(0).normal(size=(10, 3))) == 0.5).all()


def test_no_trees_predicts_base_rate():
    X, y = noisy_data(300, seed=10)
    w = np.random.default_rng(11).uniform(0.5, 2.0, size=len(y))
    model = fit_boosted_trees(X, y, w, n_estimators=0)
    rate = (w * y).sum() / w.sum()
    np.testing.assert_allclose(model.predict_proba(X), rate, rtol=1e-12)


@given(st.integers(0, 10_000), st.integers(20, 250), st.floats(0.1, 0.9))
def test_boosting_is_monotone_on_monotone_data(seed, n, cut):
    # one bin per distinct value, so no histogram bin straddles the step
    from sklearn.isotonic import IsotonicRegression

    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 10, n))
    y = (x >= np.quantile(x, cut)).astype(int)
    if y.min() == y.max():
        return
    model = fit(LearnerSpec(TREES, {**SMALL_TREES, "max_bins": 256}), x[:, None], y)
    probe = np.sort(np.r_[x, rng.uniform(-1, 11, 200)])
    p = predict_proba(model, probe[:, None])
    iso = IsotonicRegression().fit_transform(probe, p)
    np.testing.assert_allclose(p, iso, atol=1e-12, rtol=0)


@given(st.integers(0, 10_000), st.floats(0.1, 100.0))
def test_logistic_weight_scaling_invariance(seed, c):
    X, y = noisy_data(120, seed=seed % 50)
    w = np.random.default_rng(seed).uniform(0.1, 3.0, size=len(y))
    probe = np.random.default_rng(seed + 1).normal(size=(50, 3))
    spec = LearnerSpec(LOGISTIC, {"epochs": 100})
    a = predict_proba(fit(spec, X, y, w), probe)
    b = predict_proba(fit(spec, X, y, c * w), probe)
    np.testing.assert_allclose(a, b, atol=1e-6, rtol=0)


@given(st.integers(0, 10_000), st.floats(0.0, 0.5))
def test_logistic_gradient_matches_finite_differences(seed, l2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 4))
    y = rng.integers(0, 2, 40).astype(float)
    w = rng.uniform(0.0, 2.0, 40)
    w[0] = 1.0
    params = rng.normal(size=5)
    _, grad = loss_and_grad(params, X, y, w, l2)
    h = 1e-6
    fd = np.empty(5)
    for j in range(5):
        e = np.zeros(5)
        e[j] = h
        fd[j] = (loss_and_grad(params + e, X, y, w, l2)[0] - loss_and_grad(params - e, X, y, w, l2)[0]) / (2 * h)
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-8)


def test_logistic_matches_reference_solver():
    sklearn = pytest.importorskip("sklearn.linear_model")
    X, y = noisy_data(500, seed=13)
    w = np.random.default_rng(14).uniform(0.5, 2.0, size=len(y))
    ours = fit(LearnerSpec(LOGISTIC, {"epochs": 2000, "l2": 1e-6, "learning_rate": 1.0}), X, y, w)
    mu = np.average(X, axis=0, weights=w)
    sd = np.sqrt(np.average((X - mu) ** 2, axis=0, weights=w))
    ref = sklearn.LogisticRegression(C=1.0 / (1e-6 * w.sum()), tol=1e-10, max_iter=10_000)
    ref.fit((X - mu) / sd, y, sample_weight=w)
    np.testing.assert_allclose(predict_proba(ours, X), ref.predict_proba((X - mu) / sd)[:, 1], atol=1e-4)


def test_sample_grid_25_distinct_in_range():
    grid = sample_grid(TREES, 25, seed=0)
    assert len(grid) == 25
    assert len({tuple(sorted(s.hyperparameters.items())) for s in grid}) == 25
    for s in grid:
        for name, (lo, hi) in TREE_RANGES.items():
            assert lo <= s.hyperparameters[name] <= hi
        assert s.hyperparameters["n_estimators"] <= 500
    assert sample_grid(TREES, 25, seed=0) == grid
    assert len(sample_grid(TREES, 1, seed=3)) == 1
    assert len(sample_grid(LOGISTIC, 4, seed=3)) == 4


def test_sample_grid_is_log_uniform():
    grid = sample_grid(TREES, 400, seed=1, max_estimators=10_000)
    lr = np.log([s.hyperparameters["learning_rate"] for s in grid])
    lo, hi = np.log(TREE_RANGES["learning_rate"])
    # the median of a log-uniform draw sits at the geometric midpoint
    assert abs(np.median(lr) - (lo + hi) / 2) < 0.15 * (hi - lo)


def test_spec_validation():
    with pytest.raises(FadoValidationError):
        LearnerSpec(TREES, {"num_leaves": 5})
    with pytest.raises(FadoValidationError):
        LearnerSpec(TREES, {"colour": 1})
    with pytest.raises(FadoValidationError):
        LearnerSpec("forest")
    with pytest.raises(FadoValidationError):
        sample_grid(TREES, 0)


@pytest.mark.parametrize("kind,hp", [(LOGISTIC, {}), (TREES, SMALL_TREES)])
def test_model_json_round_trip(kind, hp):
    X, y = noisy_data(200, seed=15)
    model = fit(LearnerSpec(kind, hp, seed=4), X, y)
    back = model_from_json(model_to_json(model))
    np.testing.assert_array_equal(predict_proba(back, X), predict_proba(model, X))


def test_fit_is_deterministic():
    X, y = noisy_data(300, seed=16)
    spec = LearnerSpec(TREES, SMALL_TREES, seed=1)
    np.testing.assert_array_equal(predict_proba(fit(spec, X, y), X), predict_proba(fit(spec, X, y), X))
