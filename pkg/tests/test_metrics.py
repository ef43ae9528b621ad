import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lnnrfs.errors import ContractError
from lnnrfs.metrics import (GospaSeries, aggregate_runs, gospa, read_gospa_csv, solve_assignment,
                            write_gospa_csv)

from gospa_oracle import brute_assignment, brute_gospa


def test_identical_sets():
    X = np.array([[1.0, 2.0], [30.0, -4.0], [1.0, 2.0]])
    assert gospa(X, X[::-1]).total == 0.0


def test_single_missed():
    r = gospa(np.array([[0.0, 0.0]]), np.zeros((0, 2)))
    assert r.total == 50.0 and r.missed == 50.0 and r.n_missed == 1


def test_decomposition_adds_up():
    X = np.array([[0.0, 0.0], [500.0, 0.0], [0.0, 300.0]])
    Y = np.array([[3.0, 4.0], [500.0, 150.0], [900.0, 900.0], [10.0, 300.0]])
    r = gospa(X, Y)
    assert r.total == pytest.approx(r.localization + r.missed + r.false_)
    assert (r.localization, r.n_missed, r.n_false) == (pytest.approx(15.0), 1, 2)


def test_alpha_other_than_two():
    r = gospa(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0], [50.0, 0.0]]), alpha=1.0)
    assert r.total == pytest.approx(5.0 + 100.0) and np.isnan(r.missed)


def test_invalid_parameters():
    with pytest.raises(ContractError):
        gospa(np.zeros((1, 2)), np.zeros((1, 2)), c=0.0)
    with pytest.raises(ContractError):
        gospa(np.zeros((1, 2)), np.zeros((1, 2)), p=0.5)


def test_assignment_small_cases():
    rows, cols, total = solve_assignment(np.array([[7.0]]))
    assert rows.tolist() == [0] and cols.tolist() == [0] and total == 7.0
    perm = np.array([2, 0, 3, 1])
    C = np.ones((4, 4))
    C[np.arange(4), perm] = 0.0
    rows, cols, total = solve_assignment(C)
    assert cols[np.argsort(rows)].tolist() == perm.tolist() and total == 0.0
    with pytest.raises(ContractError):
        solve_assignment(np.array([[np.inf]]))


def test_assignment_against_permutations():
    rng = np.random.default_rng(0)
    for _ in range(20):
        C = rng.uniform(0, 10, (6, 6))
        assert solve_assignment(C)[2] == pytest.approx(brute_assignment(C), rel=1e-12)


points = st.lists(st.tuples(st.floats(-200, 200), st.floats(-200, 200)), max_size=5)


@settings(max_examples=60, deadline=None)
@given(points, points, st.sampled_from([1.0, 2.0]))
def test_gospa_matches_enumeration(X, Y, p):
    X = np.array(X).reshape(-1, 2)
    Y = np.array(Y).reshape(-1, 2)
    assert gospa(X, Y, p=p).total == pytest.approx(brute_gospa(X, Y, p=p), rel=1e-9, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(points, points)
def test_gospa_symmetric_and_bounded(X, Y):
    X = np.array(X).reshape(-1, 2)
    Y = np.array(Y).reshape(-1, 2)
    a, b = gospa(X, Y).total, gospa(Y, X).total
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)
    assert a <= 50.0 * (len(X) + len(Y)) + 1e-9


def _series(values, seed=0):
    t = np.arange(len(values), dtype=float)
    v = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    loc = rng.uniform(0, 1, len(v)) * v
    return GospaSeries(t, v, loc, 0.5 * (v - loc), 0.5 * (v - loc))


def test_aggregate_single_run():
    s = _series([1.0, 2.0, 3.0])
    agg = aggregate_runs([s])
    np.testing.assert_array_equal(agg.mean_total, s.total)
    np.testing.assert_array_equal(agg.std_total, 0.0)


def test_aggregate_constants():
    agg = aggregate_runs([_series([10.0] * 4), _series([20.0] * 4)])
    np.testing.assert_array_equal(agg.mean_total, 15.0)
    assert agg.time_average()["total"] == 15.0


def test_aggregate_three_run_fixture():
    runs = [_series([4.0, 8.0], 1), _series([6.0, 2.0], 2), _series([5.0, 5.0], 3)]
    agg = aggregate_runs(runs)
    np.testing.assert_allclose(agg.mean_total, [5.0, 5.0])
    np.testing.assert_allclose(agg.std_total, [np.sqrt(2 / 3), np.sqrt(6.0)])
    np.testing.assert_allclose(agg.mean_loc, np.mean([r.localization for r in runs], axis=0))
    assert agg.time_average(1, 1)["total"] == 5.0


def test_aggregate_rejects_bad_input():
    with pytest.raises(ContractError):
        aggregate_runs([])
    with pytest.raises(ContractError):
        aggregate_runs([_series([1.0]), _series([1.0, 2.0])])


def test_csv_roundtrip(tmp_path):
    aggs = {"a": aggregate_runs([_series([1.0, 2.5])]), "b": aggregate_runs([_series([0.1, 1 / 3])])}
    write_gospa_csv(tmp_path / "g.csv", aggs)
    back = read_gospa_csv(tmp_path / "g.csv")
    assert list(back) == ["a", "b"]
    np.testing.assert_array_equal(back["b"]["mean_total"], aggs["b"].mean_total)
    assert (tmp_path / "g.csv").read_text().splitlines()[0] == \
        "filter,t,mean_total,std_total,mean_loc,mean_missed,mean_false"
