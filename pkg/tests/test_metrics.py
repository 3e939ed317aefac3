import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bomaster.metrics import (
    ParetoPoint,
    a_gap,
    gap_from_values,
    l2_discrepancy,
    l2_discrepancy_mc,
    mean_curve,
    pareto_front,
    regret,
)
from bomaster.sampling import make_rng


# -- GAP -----------------------------------------------------------------------


def test_gap_examples():
    c = gap_from_values([10.0, 12.0, 4.0], n0=2, y_star=0.0)
    assert c.values.tolist() == [0.6]
    c = gap_from_values([10.0, 11.0, 0.0, 5.0], n0=1, y_star=0.0)
    assert c.values.tolist() == [0.0, 1.0, 1.0]
    c = gap_from_values([3.0, 5.0, 7.0], n0=1, y_star=0.0)
    assert np.all(c.values == 0.0)


def test_gap_degenerate_initial_design():
    c = gap_from_values([0.0, 1.0, 2.0], n0=1, y_star=0.0)
    assert c.degenerate and np.all(c.values == 1.0)


@given(
    y=st.lists(st.floats(-100, 100), min_size=2, max_size=40),
    n0=st.integers(1, 5),
)
def test_gap_monotone_and_bounded(y, n0):
    n0 = min(n0, len(y))
    y_star = min(y) - 1.0
    vals = gap_from_values(y, n0, y_star).values
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(np.diff(vals) >= 0)


def test_a_gap_examples():
    assert a_gap([1.0, 1.0]) == 1.0
    assert a_gap([0.0, 0.0, 0.0]) == 0.0
    assert a_gap([0.0, 0.5, 1.0, 1.0]) == 0.625
    with pytest.raises(ValueError):
        a_gap([])
    lo, hi = np.array([0.1, 0.2, 0.5]), np.array([0.2, 0.2, 0.9])
    assert a_gap(lo) <= a_gap(hi)
    assert mean_curve([lo, hi]).tolist() == pytest.approx([0.15, 0.2, 0.7])


# -- discrepancy ---------------------------------------------------------------


def test_discrepancy_single_point_example():
    assert l2_discrepancy([[0.5]]) == pytest.approx(math.sqrt(1 / 12), abs=1e-12)
    assert l2_discrepancy([[0.5]]) == pytest.approx(0.28868, abs=1e-5)


def test_discrepancy_rejects_out_of_range():
    with pytest.raises(ValueError):
        l2_discrepancy([[0.5, 1.2]])
    with pytest.raises(ValueError):
        l2_discrepancy([[np.nan]])


def test_discrepancy_closed_form_vs_small_mc():
    # quick version of the acceptance check (the full one runs 10^6 samples)
    rng = np.random.default_rng(0)
    X = rng.random((8, 2))
    est, se = l2_discrepancy_mc(X, 200_000, make_rng(1))
    assert abs(est - l2_discrepancy(X) ** 2) <= 4 * se


def test_midpoints_beat_random_points():
    m = 16
    mid = ((2 * np.arange(1, m + 1) - 1) / (2 * m))[:, None]
    d_mid = l2_discrepancy(mid)
    rng = np.random.default_rng(0)
    wins = sum(d_mid < l2_discrepancy(rng.random((m, 1))) for _ in range(200))
    assert wins >= 0.95 * 200


def test_discrepancy_permutation_invariance():
    rng = np.random.default_rng(1)
    X = rng.random((20, 3))
    base = l2_discrepancy(X)
    assert l2_discrepancy(X[rng.permutation(20)]) == pytest.approx(base, rel=1e-12)
    assert l2_discrepancy(X[:, [2, 0, 1]]) == pytest.approx(base, rel=1e-12)


def test_discrepancy_shrinks_with_more_points():
    rng = np.random.default_rng(2)
    small = np.median([l2_discrepancy(rng.random((10, 2))) for _ in range(50)])
    large = np.median([l2_discrepancy(rng.random((1000, 2))) for _ in range(50)])
    assert large < small


# -- Pareto --------------------------------------------------------------------


def P(name, g, d):
    return ParetoPoint(name, g, d)


def test_pareto_examples():
    ann, front = pareto_front([P("a", 0.3, 0.2)])
    assert [p.policy for p in front] == ["a"]
    ann, front = pareto_front([P("a", 1.0, 0.1), P("b", 0.5, 0.2)])
    assert [p.dominated for p in ann] == [False, True]
    ann, front = pareto_front([P("a", 0.5, 0.2), P("b", 0.5, 0.2)])
    assert not any(p.dominated for p in ann)


@given(
    pts=st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=15)
)
@settings(max_examples=100, deadline=None)
def test_pareto_flags_and_idempotence(pts):
    points = [P(str(i), g / 5, d / 5) for i, (g, d) in enumerate(pts)]
    ann, front = pareto_front(points)
    for p in ann:
        dominated = any(
            q.a_gap >= p.a_gap and q.d_l2 <= p.d_l2 and (q.a_gap > p.a_gap or q.d_l2 < p.d_l2)
            for q in points
        )
        assert p.dominated == dominated
    assert [p.a_gap for p in front] == sorted(p.a_gap for p in front)
    _, again = pareto_front(front)
    assert [p.policy for p in again] == [p.policy for p in front]


# -- regret --------------------------------------------------------------------


def trace_of(y, n0):
    return SimpleNamespace(y=np.asarray(y, float), n0=n0)


def test_regret_examples():
    r = regret(trace_of([5.0, 3.0, 1.0, 1.0], 2), 1.0)
    assert r.cumulative == 0.0
    r = regret(trace_of([9.0] + [2.0] * 10, 1), 1.0)
    assert r.cumulative == 10.0 and r.average == 1.0
    longer = regret(trace_of([9.0] + [2.0] * 10 + [1.0] * 5, 1), 1.0)
    assert longer.average < r.average
