import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import ks_2samp

from fado.dataset import Dataset
from fado.errors import FadoValidationError
from fado.learners import LOGISTIC, TREES, LearnerSpec, fit, predict_proba
from fado.synthgen import BiasSpec, generate
from fado.valuation import (
    IN_BAG,
    ValuationConfig,
    ValuationVector,
    design_for,
    in_bag_valuation,
    make_bags,
    out_of_bag_valuation,
    prediction_entropy,
    value_dataset,
)

from conftest import toy_dataset

LOGIT = LearnerSpec(LOGISTIC)


def entropy_reference(p):
    p = mpmath.mpf(p)
    if p in (0, 1):
        return mpmath.mpf(0)
    return -(p * mpmath.log(p, 2) + (1 - p) * mpmath.log(1 - p, 2))


# frozen from a 50-digit evaluation of the closed form
ENTROPY_QUARTER = 0.8112781244591328


def test_entropy_examples():
    assert prediction_entropy(0.5) == 1.0
    assert prediction_entropy(0.0) == 0.0
    assert prediction_entropy(1.0) == 0.0
    assert prediction_entropy(0.25) == pytest.approx(ENTROPY_QUARTER, abs=1e-15)
    with mpmath.workdps(50):
        assert float(entropy_reference(0.25)) == ENTROPY_QUARTER


@pytest.mark.parametrize("p", [-0.1, 1.0000001, np.nan])
def test_entropy_rejects_out_of_range(p):
    with pytest.raises(FadoValidationError):
        prediction_entropy(p)


@given(st.floats(0.0, 1.0))
def test_entropy_symmetric_and_bounded(p):
    e = prediction_entropy(p)
    assert 0.0 <= e <= 1.0
    assert e == pytest.approx(prediction_entropy(1.0 - p), abs=1e-12)
    assert e <= prediction_entropy(0.5)


def test_bags_small_example():
    cfg = ValuationConfig(n_bags=5, pct_unseen=0.2, seed=0)
    bags = make_bags(10, cfg)
    assert [len(o) for o in bags.out_of_bag] == [2] * 5
    assert sorted(np.concatenate(bags.out_of_bag).tolist()) == list(range(10))
    for ib, ob in zip(bags.in_bag, bags.out_of_bag):
        assert set(ib).isdisjoint(ob) and len(ib) + len(ob) == 10
    again = make_bags(10, cfg)
    for a, b in zip(bags.out_of_bag, again.out_of_bag):
        np.testing.assert_array_equal(a, b)


def test_bags_reject_degenerate():
    with pytest.raises(FadoValidationError):
        make_bags(4, ValuationConfig(n_bags=1, pct_unseen=0.999))
    with pytest.raises(FadoValidationError):
        ValuationConfig(n_bags=2, pct_unseen=0.2)


@given(st.integers(2, 400), st.integers(1, 12), st.floats(0.01, 0.99), st.integers(0, 1000))
def test_bags_cover_every_row(n, n_bags, pct, seed):
    size = int(np.floor(n * pct))
    if n_bags * pct < 1:
        return
    try:
        bags = make_bags(n, ValuationConfig(n_bags=n_bags, pct_unseen=pct, seed=seed))
    except FadoValidationError:
        assert size < 1 or size >= n or n_bags * size < n
        return
    assert all(len(o) == size for o in bags.out_of_bag)
    assert (bags.coverage(n) >= 1).all()
    for o in bags.out_of_bag:
        assert len(np.unique(o)) == len(o)


def test_stratified_bags_balance_classes():
    labels = np.r_[np.ones(10), np.zeros(90)].astype(int)
    bags = make_bags(100, ValuationConfig(n_bags=5, pct_unseen=0.2, stratify=True, seed=1), labels=labels)
    assert [int(labels[o].sum()) for o in bags.out_of_bag] == [2] * 5


def test_z_design_drops_z_and_adds_y():
    d = toy_dataset({"A": (3, 3), "B": (3, 3)}, include_protected=True)
    X, z = design_for(d, "z")
    assert X.shape == (12, 3)
    np.testing.assert_array_equal(X[:, -1], d.target)
    np.testing.assert_array_equal(z, d.protected["z"])


def test_single_contribution_is_plain_entropy():
    # one bag cannot cover every row, so use two halves: each row is out-of-bag exactly once
    d = toy_dataset({"A": (20, 40), "B": (25, 35)}, seed=1)
    cfg = ValuationConfig(n_bags=2, pct_unseen=0.5, models=(LOGIT,), seed=2)
    bags = make_bags(d.n, cfg)
    assert (bags.coverage(d.n) == 1).all()
    v = out_of_bag_valuation(d, "target", cfg, bags=bags)
    for ib, ob in zip(bags.in_bag, bags.out_of_bag):
        model = fit(LOGIT, d.features[ib], d.target[ib])
        np.testing.assert_array_equal(v[ob], prediction_entropy(predict_proba(model, d.features[ob])))


def test_in_bag_single_model_is_in_sample_entropy():
    d = toy_dataset({"A": (20, 40), "B": (25, 35)}, seed=3)
    v = in_bag_valuation(d, "target", ValuationConfig(algorithm=IN_BAG, models=(LOGIT,)))
    model = fit(LOGIT, d.features, d.target)
    np.testing.assert_array_equal(v, prediction_entropy(predict_proba(model, d.features)))
    twice = in_bag_valuation(d, "target", ValuationConfig(algorithm=IN_BAG, models=(LOGIT, LOGIT)))
    np.testing.assert_allclose(twice, v, rtol=0, atol=1e-15)


def test_in_bag_separable_data_has_low_value():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(400, 2))
    X[:, 0] += np.where(np.arange(400) < 200, -4.0, 4.0)
    y = (np.arange(400) >= 200).astype(int)
    d = Dataset.from_arrays(X, y, {"z": rng.integers(0, 2, 400)}, include_protected=False)
    trees = LearnerSpec(TREES, {"n_estimators": 100, "num_leaves": 10, "min_child_samples": 5, "max_depth": 3,
                                "learning_rate": 0.3})
    v = in_bag_valuation(d, "target", ValuationConfig(algorithm=IN_BAG, models=(trees,)))
    assert v.mean() < 0.05


def test_unbiased_z_values_near_one():
    d = generate(BiasSpec(n_rows=4000, group_prevalences=(0.1, 0.1), include_protected=False, seed=5))
    vz = out_of_bag_valuation(d, "z", ValuationConfig(models=(LOGIT,), seed=1))
    assert vz.mean() > 0.99
    assert ((vz >= 0) & (vz <= 1)).all()


def test_biased_z_values_drop():
    d = generate(BiasSpec(n_rows=4000, group_prevalences=(0.1, 0.1), conditional_shift=((0, 0), (2, 2)),
                          include_protected=False, seed=5))
    vz = out_of_bag_valuation(d, "z", ValuationConfig(models=(LOGIT,), seed=1))
    assert vz.mean() < 0.8


def test_valuation_stable_across_seeds():
    d = generate(BiasSpec(n_rows=3000, group_prevalences=(0.05, 0.1), conditional_shift=((0, 0), (1, 1)),
                          seed=6))
    a = value_dataset(d, ValuationConfig(models=(LOGIT,), seed=1))
    b = value_dataset(d, ValuationConfig(models=(LOGIT,), seed=2))
    assert ks_2samp(a.v_y, b.v_y).statistic < 0.1
    assert ks_2samp(a.v_z["z"], b.v_z["z"]).statistic < 0.1


def test_same_result_for_any_thread_count():
    d = generate(BiasSpec(n_rows=1500, group_prevalences=(0.05, 0.1), conditional_shift=((0, 0), (1, 1)),
                          seed=7))
    cfg = ValuationConfig(seed=3)
    a = value_dataset(d, cfg, threads=1)
    b = value_dataset(d, cfg, threads=3)
    np.testing.assert_array_equal(a.v_y, b.v_y)
    np.testing.assert_array_equal(a.v_z["z"], b.v_z["z"])


def test_skipped_pairs_warn_and_missing_rows_fail():
    from fado.valuation import BagAssignment

    # rows 0 and 31 are the only positives; bag 0 holds both out-of-bag, so its in-bag set is single-class
    d = toy_dataset({"A": (1, 30), "B": (1, 30)}, seed=8)
    first = np.r_[0, 31, np.arange(1, 30)]
    rest = np.setdiff1d(np.arange(d.n), first)
    bags = BagAssignment(in_bag=(rest, first), out_of_bag=(first, rest))
    cfg = ValuationConfig(n_bags=2, pct_unseen=0.5, models=(LOGIT,), seed=0)
    with pytest.warns(UserWarning, match="skip"):
        with pytest.raises(FadoValidationError, match=r"row.*\b0\b"):
            out_of_bag_valuation(d, "target", cfg, bags=bags)


def test_single_class_variable_rejected():
    d = Dataset.from_arrays(np.random.default_rng(0).normal(size=(20, 2)), [0] * 20, {"z": [0, 1] * 10})
    with pytest.raises(FadoValidationError):
        in_bag_valuation(d, "target", ValuationConfig(algorithm=IN_BAG, models=(LOGIT,)))
    with pytest.raises(FadoValidationError):
        in_bag_valuation(d, "nope", ValuationConfig(algorithm=IN_BAG, models=(LOGIT,)))


def test_values_in_unit_interval_and_csv_round_trip(tmp_path):
    d = toy_dataset({"A": (30, 70), "B": (40, 60)}, seed=9)
    vals = value_dataset(d, ValuationConfig(seed=4))
    for arr in (vals.v_y, vals.v_z["z"]):
        assert ((arr >= 0) & (arr <= 1)).all()
    path = tmp_path / "v.csv"
    vals.to_csv(path)
    assert path.read_text().splitlines()[0] == "id,v_y,v_z_z"
    back = ValuationVector.from_csv(path)
    np.testing.assert_array_equal(back.v_y, vals.v_y)
    np.testing.assert_array_equal(back.v_z["z"], vals.v_z["z"])
    vals.write_sidecar(tmp_path / "v.json")
    assert ValuationConfig.from_dict(__import__("json").loads((tmp_path / "v.json").read_text())
                                     ["valuation_config"]).to_dict() == vals.config.to_dict()
