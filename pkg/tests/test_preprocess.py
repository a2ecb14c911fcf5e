import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fado.dataset import Dataset
from fado.errors import FadoValidationError
from fado.preprocess import no_intervention, removal_count, rps, rw, uar, uasp
from fado.utility import LINEAR, SUBTRACTIVE, UtilityConfig, UtilityVector, compute_utility

from conftest import toy_dataset


def utilities(d, values):
    return UtilityVector(ids=d.ids, U=np.asarray(values, float), config=UtilityConfig())


def prevalences(d, weights=None):
    w = np.ones(d.n) if weights is None else np.asarray(weights)
    z = d.protected["z"]
    return {g: (w * d.target)[z == g].sum() / w[z == g].sum() for g in np.unique(z)}


def uasp_toy():
    # A: 2 pos / 2 neg (ids 0-3); B: 1 pos / 3 neg (ids 4-7)
    d = toy_dataset({"A": (2, 2), "B": (1, 3)})
    u = np.zeros(8)
    u[[5, 6, 7]] = [0.9, 0.1, 0.5]
    return d, utilities(d, u)


def test_uasp_toy_removes_lowest_utility_negatives():
    d, u = uasp_toy()
    res = uasp(d, u, "z")
    assert sorted(set(range(8)) - set(res.kept_ids.tolist())) == [6, 7]
    kept, w = res.apply(d)
    assert prevalences(kept)[1] == 0.5
    assert (w == 1).all()


def test_rps_toy_removes_same_count():
    d, _ = uasp_toy()
    for seed in range(5):
        res = rps(d, "z", seed=seed)
        removed = set(range(8)) - set(res.kept_ids.tolist())
        assert len(removed) == 2 and removed <= {5, 6, 7}
    np.testing.assert_array_equal(rps(d, "z", seed=1).kept_ids, rps(d, "z", seed=1).kept_ids)


def test_equal_prevalences_are_identity():
    d = toy_dataset({"A": (1, 3), "B": (2, 6)})
    u = utilities(d, np.arange(d.n))
    assert uasp(d, u, "z").kept_ids.tolist() == list(range(d.n))
    assert rps(d, "z").kept_ids.tolist() == list(range(d.n))


def test_uasp_ties_go_to_smaller_id():
    d = toy_dataset({"A": (2, 2), "B": (1, 5)})
    res = uasp(d, utilities(d, np.zeros(d.n)), "z")
    removed = sorted(set(range(d.n)) - set(res.kept_ids.tolist()))
    assert removed == [5, 6, 7, 8]


def test_zero_positive_group_rejected():
    d = toy_dataset({"A": (2, 2), "B": (0, 4)})
    with pytest.raises(FadoValidationError, match="no positives"):
        rps(d, "z")


def test_three_groups_rejected_for_sampling():
    d = toy_dataset({"A": (1, 2), "B": (1, 3), "C": (1, 4)})
    with pytest.raises(FadoValidationError, match="exactly 2"):
        rps(d, "z")


def test_misaligned_utilities_rejected():
    d, u = uasp_toy()
    with pytest.raises(FadoValidationError):
        uasp(d, UtilityVector(ids=d.ids[::-1], U=u.U, config=u.config), "z")
    with pytest.raises(FadoValidationError):
        uar(d, UtilityVector(ids=d.ids[:3], U=u.U[:3], config=u.config))


def test_uar_examples():
    d = toy_dataset({"A": (1, 0), "B": (1, 1)})
    assert uar(d, utilities(d, [0, 5, 10])).weights.tolist() == [0.0, 0.5, 1.0]
    assert uar(d, utilities(d, [0.2, 0.5, 0.3]), scaling="none").weights.tolist() == [0.2, 0.5, 0.3]
    sub = compute_utility(np.array([0.1, 0.9, 0.5]), np.array([0.9, 0.1, 0.5]),
                          UtilityConfig(SUBTRACTIVE, alpha=0.5, scaling="none"), ids=d.ids)
    w = uar(d, sub, scaling="none").weights
    assert w[0] == 0.0 and w[1] == pytest.approx(0.4) and w[2] == 0.0
    with pytest.raises(FadoValidationError, match="zero"):
        uar(d, utilities(d, [-1, -2, 0]), scaling="none")


def test_rw_hand_example():
    d = toy_dataset({"A": (1, 5), "B": (1, 3)})
    w = rw(d, "z").weights
    assert w[0] == pytest.approx(1.2, abs=1e-12)
    assert w[1] == pytest.approx(0.96, abs=1e-12)
    assert w[6] == pytest.approx(0.8, abs=1e-12)
    assert w[7] == pytest.approx(1.0666666666666667, abs=1e-12)


def test_rw_independent_counts_give_unit_weights():
    d = toy_dataset({"A": (1, 3), "B": (2, 6)})
    np.testing.assert_allclose(rw(d, "z").weights, 1.0, rtol=0, atol=1e-15)


def test_rw_empty_cell_rejected():
    d = toy_dataset({"A": (2, 2), "B": (0, 4)})
    with pytest.raises(FadoValidationError, match="no rows"):
        rw(d, "z")


def test_none_is_identity():
    d, _ = uasp_toy()
    res = no_intervention(d)
    kept, w = res.apply(d)
    assert kept.ids.tolist() == d.ids.tolist() and (w == 1).all()


def test_removal_count_closed_form():
    assert removal_count(1, 4, 0.5) == 2
    assert removal_count(1, 4, 0.25) == 0
    # 3 / (10 - k) >= 0.4  ->  k >= 2.5
    assert removal_count(3, 10, 0.4) == 3


group_counts = st.tuples(st.integers(1, 20), st.integers(1, 60))


@given(group_counts, group_counts, st.integers(0, 10_000))
def test_sampling_invariants(a, b, seed):
    d = toy_dataset({"A": a, "B": b}, seed=seed)
    rng = np.random.default_rng(seed)
    u = utilities(d, rng.integers(0, 4, d.n) / 4)
    r_uasp, r_rps = uasp(d, u, "z"), rps(d, "z", seed=seed)
    assert len(r_uasp.kept_ids) == len(r_rps.kept_ids)
    for res in (r_uasp, r_rps):
        kept, _ = res.apply(d)
        removed = np.setdiff1d(d.ids, kept.ids)
        assert (d.target[removed] == 0).all()
        assert len(np.unique(d.protected["z"][removed])) <= 1
        np.testing.assert_array_equal(kept.features, d.features[kept.ids])
        p = prevalences(kept)
        smaller = min((kept.protected["z"] == g).sum() for g in p)
        assert abs(p[0] - p[1]) <= 1 / smaller + 1e-12


@given(st.lists(group_counts, min_size=2, max_size=4), st.integers(0, 1000))
def test_rw_invariants(groups, seed):
    d = toy_dataset({chr(65 + i): g for i, g in enumerate(groups)}, seed=seed)
    w = rw(d, "z").weights
    assert w.sum() == pytest.approx(d.n, abs=1e-9)
    prev = list(prevalences(d, w).values())
    assert max(prev) - min(prev) <= 1e-9


def test_uar_and_rw_keep_rows():
    d, u = uasp_toy()
    assert uar(d, u).kept_ids.tolist() == d.ids.tolist()
    assert rw(d, "z").kept_ids.tolist() == d.ids.tolist()
