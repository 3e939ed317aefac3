"""Minimize a cheap score over the unit cube.

A Latin hypercube of candidates is scored in one batch, then the most
promising few are polished with bounded L-BFGS-B using central-difference
gradients. Scores are vectorized: they map an ``(m, d)`` array to ``(m,)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .errors import NumericalError
from .sampling import lhs

__all__ = ["InnerConfig", "InnerResult", "minimize"]

Score = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InnerConfig:
    n_candidates: int | None = None  # None -> 100 * d
    n_refine: int = 5
    max_local_steps: int = 50
    tolerance: float = 1e-6
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.n_candidates is not None and self.n_candidates < 1:
            raise ValueError("n_candidates must be positive")
        if self.n_refine < 0:
            raise ValueError("n_refine must be nonnegative")
        if self.n_candidates is not None and self.n_refine > self.n_candidates:
            raise ValueError("n_refine cannot exceed n_candidates")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")

    def candidates_for(self, d: int) -> int:
        return 100 * d if self.n_candidates is None else self.n_candidates


@dataclass(frozen=True)
class InnerResult:
    x: np.ndarray
    value: float
    pool: np.ndarray  # candidates followed by refined end points
    pool_scores: np.ndarray


def _checked(score: Score, X: np.ndarray) -> np.ndarray:
    vals = np.asarray(score(X), dtype=float).reshape(-1)
    bad = np.flatnonzero(np.isnan(vals))
    if bad.size:
        raise NumericalError(f"score is NaN at {X[bad[0]].tolist()}")
    return vals


def _value_and_grad(score: Score, h: float):
    def fg(x):
        d = x.size
        lo = np.clip(x[None, :] - h * np.eye(d), 0.0, 1.0)
        hi = np.clip(x[None, :] + h * np.eye(d), 0.0, 1.0)
        vals = _checked(score, np.vstack([x[None, :], hi, lo]))
        span = np.diag(hi) - np.diag(lo)
        return vals[0], (vals[1 : d + 1] - vals[d + 1 :]) / span

    return fg


def minimize(score: Score, d: int, cfg: InnerConfig, rng: np.random.Generator) -> InnerResult:
    """Best point found for ``score`` over ``[0, 1]^d``.

    The returned value never exceeds the best raw candidate's score, and
    every returned coordinate lies in ``[0, 1]``.
    """
    cand = lhs(cfg.candidates_for(d), d, rng)
    cand_scores = _checked(score, cand)
    order = np.argsort(cand_scores, kind="stable")

    fg = _value_and_grad(score, cfg.fd_step)
    bounds = [(0.0, 1.0)] * d
    refined, refined_scores = [], []
    for i in order[: cfg.n_refine]:
        res = _scipy_minimize(
            fg,
            cand[i],
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": cfg.max_local_steps, "gtol": cfg.tolerance},
        )
        x = np.clip(res.x, 0.0, 1.0)
        refined.append(x)
        refined_scores.append(_checked(score, x[None, :])[0])

    if refined:
        pool = np.vstack([cand, np.asarray(refined)])
        pool_scores = np.concatenate([cand_scores, refined_scores])
    else:
        pool, pool_scores = cand, cand_scores
    best = int(np.argmin(pool_scores))
    return InnerResult(pool[best].copy(), float(pool_scores[best]), pool, pool_scores)
