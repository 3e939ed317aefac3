"""Run-quality measures: GAP curves, L2-discrepancy, regret, Pareto analysis."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "GapCurve",
    "ParetoPoint",
    "gap_curve",
    "gap_from_values",
    "a_gap",
    "mean_curve",
    "l2_discrepancy",
    "l2_discrepancy_mc",
    "pareto_front",
    "regret",
    "Regret",
]


@dataclass(frozen=True)
class GapCurve:
    values: np.ndarray  # one value per decision, n0+1 .. N
    n0: int
    N: int
    degenerate: bool = False  # initial design already optimal


def gap_from_values(y, n0: int, y_star: float) -> GapCurve:
    """GAP after each decision, from the full observation sequence ``y``.

    Best-so-far includes the initial design, so the curve is monotone and
    stays in [0, 1] even when the optimizer never beats its starting points.
    """
    y = np.asarray(y, dtype=float)
    if n0 < 1 or n0 > y.size:
        raise ValueError(f"n0={n0} incompatible with {y.size} observations")
    best = np.minimum.accumulate(y)
    y0 = best[n0 - 1]
    denom = abs(y0 - y_star)
    if denom == 0.0:
        return GapCurve(np.ones(y.size - n0), n0, y.size, degenerate=True)
    vals = np.clip(np.abs(y0 - best[n0:]) / denom, 0.0, 1.0)
    return GapCurve(vals, n0, y.size)


def gap_curve(trace, y_star: float) -> GapCurve:
    return gap_from_values(trace.y, trace.n0, y_star)


def a_gap(curve) -> float:
    """Mean of the curve over the decisions (area under the GAP curve)."""
    vals = np.asarray(getattr(curve, "values", curve), dtype=float)
    if vals.size == 0:
        raise ValueError("empty GAP curve")
    return float(np.mean(vals))


def mean_curve(curves) -> np.ndarray:
    """Pointwise average of equally long curves."""
    arr = np.array([np.asarray(getattr(c, "values", c)) for c in curves], dtype=float)
    return arr.mean(axis=0)


def l2_discrepancy(points) -> float:
    """Closed-form L2-discrepancy over all boxes [a, b) with a <= b.

    D^2 = 12^-d - (2/m) sum_i prod_k x_ik (1 - x_ik) / 2
          + (1/m^2) sum_ij prod_k min(x_ik, x_jk) (1 - max(x_ik, x_jk))
    """
    X = np.array(points, dtype=float, ndmin=2)
    m, d = X.shape
    if m < 1:
        raise ValueError("need at least one point")
    if np.any(X < 0) or np.any(X > 1) or not np.all(np.isfinite(X)):
        raise ValueError("points must lie in [0, 1]^d")
    lo = np.minimum(X[:, None, :], X[None, :, :])
    hi = np.maximum(X[:, None, :], X[None, :, :])
    pair = np.prod(lo * (1.0 - hi), axis=2).sum() / m**2
    single = np.prod(X * (1.0 - X) / 2.0, axis=1).sum() * 2.0 / m
    d2 = pair - single + 12.0 ** (-d)
    return float(np.sqrt(max(d2, 0.0)))


def l2_discrepancy_mc(points, n_samples: int, rng: np.random.Generator, chunk: int = 100_000):
    """Monte-Carlo estimate of D^2 straight from the box-integral definition.

    Draws (a, b) uniformly on [0, 1]^(2d); boxes with some a_k > b_k are
    empty and contribute zero. Returns ``(estimate of D^2, standard error)``.
    """
    X = np.array(points, dtype=float, ndmin=2)
    m, d = X.shape
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        k = min(chunk, n_samples - done)
        a = rng.random((k, d))
        b = rng.random((k, d))
        valid = np.all(a <= b, axis=1)
        vol = np.where(valid, np.prod(np.clip(b - a, 0.0, None), axis=1), 0.0)
        inside = np.all((X[None, :, :] >= a[:, None, :]) & (X[None, :, :] < b[:, None, :]), axis=2)
        frac = np.where(valid, inside.sum(axis=1) / m, 0.0)
        f = (frac - vol) ** 2
        total += f.sum()
        total_sq += (f * f).sum()
        done += k
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, float(np.sqrt(var / n_samples))


@dataclass(frozen=True)
class ParetoPoint:
    policy: str
    a_gap: float  # maximize
    d_l2: float  # minimize
    dominated: bool = False


def _dominates(q: ParetoPoint, p: ParetoPoint) -> bool:
    return q.a_gap >= p.a_gap and q.d_l2 <= p.d_l2 and (q.a_gap > p.a_gap or q.d_l2 < p.d_l2)


def pareto_front(points: list[ParetoPoint]) -> tuple[list[ParetoPoint], list[ParetoPoint]]:
    """Flag dominated points.

    Returns ``(annotated, front)``: every input point with its ``dominated``
    flag set, and the non-dominated ones sorted by ``a_gap``. The sets are
    tiny (one point per policy), so pairwise comparison is fine.
    """
    annotated = [
        replace(p, dominated=any(_dominates(q, p) for q in points if q is not p))
        for p in points
    ]
    front = sorted((p for p in annotated if not p.dominated), key=lambda p: (p.a_gap, p.policy))
    return annotated, front


@dataclass(frozen=True)
class Regret:
    instantaneous: np.ndarray
    cumulative: float
    average: float


def regret(trace, y_star: float) -> Regret:
    """Per-decision regret y - y*, its sum, and its mean over the decisions."""
    y = np.asarray(trace.y, dtype=float)[trace.n0 :]
    r = y - y_star
    total = float(r.sum())
    return Regret(r, total, total / r.size if r.size else 0.0)
