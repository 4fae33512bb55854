import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from oracles import brute_force_min

from hybridsort.assignment import solve


def check_partition(res, n, m):
    rows = [r for r, _ in res.matches] + res.unmatched_rows
    cols = [c for _, c in res.matches] + res.unmatched_cols
    assert sorted(rows) == list(range(n))
    assert sorted(cols) == list(range(m))


def random_matrices(count, seed, max_n=7):
    rng = np.random.default_rng(seed)
    for i in range(count):
        n, m = rng.integers(1, max_n + 1, size=2)
        if i % 3 == 0:
            yield rng.integers(0, 5, size=(n, m)).astype(float)  # many ties
        else:
            yield rng.uniform(-10, 10, size=(n, m))


def test_examples():
    res = solve(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert res.matches == [(0, 0), (1, 1)] and res.total_cost(np.array([[1, 2], [2, 1]])) == 2
    res = solve(np.array([[5.0, 1.0]]))
    assert res.matches == [(0, 1)] and res.unmatched_cols == [0]
    res = solve(np.zeros((0, 3)))
    assert res.matches == [] and res.unmatched_cols == [0, 1, 2]
    assert solve(np.zeros((0, 0))).matches == []


def test_optimal_against_brute_force():
    for cost in random_matrices(1000, seed=11):
        res = solve(cost)
        check_partition(res, *cost.shape)
        assert len(res.matches) == min(cost.shape)
        assert res.total_cost(cost) == pytest.approx(brute_force_min(cost.tolist()), abs=1e-9)


def test_ties_break_lexicographically():
    # every permutation costs the same
    res = solve(np.ones((3, 3)))
    assert res.matches == [(0, 0), (1, 1), (2, 2)]
    cost = np.array([[0.0, 0.0, 5.0], [0.0, 0.0, 5.0], [5.0, 5.0, 0.0]])
    assert solve(cost).matches == [(0, 0), (1, 1), (2, 2)]
    # two optima: {(0,1),(1,0)} and {(0,0),(1,1)} both cost 2; the latter is smaller
    assert solve(np.array([[1.0, 1.0], [1.0, 1.0]])).matches == [(0, 0), (1, 1)]
    assert solve(np.array([[3.0, 3.0, 1.0]])).matches == [(0, 2)]
    assert solve(np.array([[2.0, 2.0, 2.0]])).matches == [(0, 0)]


def test_tie_break_is_lexicographic_min_among_optima():
    for cost in itertools.islice(random_matrices(400, seed=5, max_n=5), 400):
        cost = np.round(cost) % 3
        n, m = cost.shape
        k = min(n, m)
        best = None
        for rows in itertools.combinations(range(n), k):
            for cols in itertools.permutations(range(m), k):
                pairs = sorted(zip(rows, cols))
                total = sum(cost[r, c] for r, c in pairs)
                key = (total, pairs)
                if best is None or key < best:
                    best = key
        assert solve(cost).matches == best[1]


def test_gated_rows_stay_unmatched():
    cost = np.array([[0.1, 0.2], [0.3, 0.4]])
    gate = np.array([[True, True], [False, False]])
    res = solve(cost, gate=gate)
    assert res.matches == [(1, 0)]
    assert res.unmatched_rows == [0] and res.unmatched_cols == [1]
    assert solve(cost, gate=np.ones((2, 2), bool)).matches == []


def test_ties_ignore_gated_pairs():
    # either row can take column 1; the other is left unmatched
    cost = np.array([[9.0, 1.0], [9.0, 1.0]])
    gate = np.array([[True, False], [True, False]])
    assert solve(cost, gate=gate).matches == [(0, 1)]
    gate = np.array([[True, False], [False, True]])
    assert solve(np.ones((2, 2)), gate=gate).matches == [(0, 1), (1, 0)]


def test_gated_tie_break_against_exhaustive_search():
    rng = np.random.default_rng(17)
    for _ in range(300):
        n, m = rng.integers(1, 5, size=2)
        cost = rng.integers(0, 3, size=(n, m)).astype(float)
        gate = rng.random((n, m)) < 0.4
        best = None
        for used in itertools.product([None, *range(m)], repeat=n):
            cols = [c for c in used if c is not None]
            if len(set(cols)) != len(cols) or any(c is not None and gate[r, c] for r, c in enumerate(used)):
                continue
            pairs = [(r, c) for r, c in enumerate(used) if c is not None]
            key = (-len(pairs), sum(cost[r, c] for r, c in pairs), pairs)
            if best is None or key < best:
                best = key
        assert solve(cost, gate=gate).matches == best[2]


def test_gating_equivalent_to_large_cost():
    rng = np.random.default_rng(21)
    for _ in range(500):
        n, m = rng.integers(1, 7, size=2)
        cost = rng.uniform(0, 1, size=(n, m))
        gate = rng.random((n, m)) < 0.4
        big = n * cost[~gate].max(initial=0.0) + 1.0 + 1e-3
        res_gate = solve(cost, gate=gate)
        res_big = solve(np.where(gate, big, cost))
        kept = [(r, c) for r, c in res_big.matches if not gate[r, c]]
        assert res_gate.matches == kept
        check_partition(res_gate, n, m)
        assert all(not gate[r, c] for r, c in res_gate.matches)


def test_constant_shift_invariance():
    for cost in itertools.islice(random_matrices(300, seed=3), 300):
        shift = 123.25
        assert solve(cost + shift).matches == solve(cost).matches


def test_non_finite_ungated_cost_rejected():
    with pytest.raises(ValueError):
        solve(np.array([[np.inf, 1.0]]))
    # but allowed where gated
    assert solve(np.array([[np.inf, 1.0]]), gate=np.array([[True, False]])).matches == [(0, 1)]


def test_deterministic():
    rng = np.random.default_rng(1)
    cost = rng.integers(0, 3, size=(6, 6)).astype(float)
    first = solve(cost).matches
    assert all(solve(cost.copy()).matches == first for _ in range(20))


@given(hnp.arrays(float, hnp.array_shapes(min_dims=2, max_dims=2, max_side=6),
                  elements=st.floats(-100, 100, allow_nan=False)))
def test_hypothesis_optimality_and_partition(cost):
    res = solve(cost)
    check_partition(res, *cost.shape)
    assert res.total_cost(cost) == pytest.approx(brute_force_min(cost.tolist()), abs=1e-7)
