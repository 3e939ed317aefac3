"""Next-point policies.

Everything minimizes: confidence bounds are lower bounds, improvement is
measured below the best observation. A policy is plain configuration; the
per-iteration choice is made by :func:`decide`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from typing import TYPE_CHECKING

import numpy as np
from scipy.special import ndtr

from . import inner_opt
from .idw import IdwField
from .sampling import fork, uniform

if TYPE_CHECKING:
    from .engine import Dataset
    from .gp import GpModel

__all__ = [
    "KINDS",
    "DECISION_KINDS",
    "AcquisitionPolicy",
    "Decision",
    "lcb",
    "beta_srinivas_t1",
    "beta_srinivas_t2",
    "beta_randomised",
    "randomised_shape",
    "pi_value",
    "ei_value",
    "pareto_mask",
    "in_neighborhood",
    "neighborhood_count",
    "decide",
    "decide_mastering",
    "default_policies",
]

log = logging.getLogger(__name__)

KINDS = (
    "cb_const",
    "cb_srinivas_t1",
    "cb_srinivas_t2",
    "cb_randomised",
    "eps_rs",
    "eps_pf",
    "pi",
    "ei",
    "pi_ei_alternating",
    "pi_ei_switching",
    "mastering",
)
DECISION_KINDS = ("exploit", "explore", "cb", "random", "pareto_random", "pi", "ei")

RANDOMISED_SHAPE_FLOOR = 1e-3

# parameters that matter for each kind; the rest are ignored
_RELEVANT = {
    "cb_const": ("beta",),
    "cb_srinivas_t1": ("delta", "grid_size"),
    "cb_srinivas_t2": ("delta", "r", "a", "b"),
    "cb_randomised": ("theta",),
    "eps_rs": ("epsilon",),
    "eps_pf": ("epsilon",),
    "pi": (),
    "ei": (),
    "pi_ei_alternating": ("alternate_start",),
    "pi_ei_switching": ("switch_fraction",),
    "mastering": ("w", "eta"),
}


# ---------------------------------------------------------------------------
# scalar building blocks (all broadcast over numpy arrays)


def lcb(mu, sigma, beta):
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    return mu - math.sqrt(beta) * np.asarray(sigma)


def beta_srinivas_t1(n: int, grid_size: float, delta: float) -> float:
    """Finite-domain schedule 2 log(|G| n^2 pi^2 / (6 delta))."""
    if grid_size < 1:
        raise ValueError("grid_size must be at least 1")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return 2.0 * math.log(grid_size * n * n * math.pi**2 / (6.0 * delta))


def beta_srinivas_t2(n: int, d: int, r: float, a: float, b: float, delta: float) -> float:
    """Continuous-domain schedule for a box ``[0, r]^d``.

    2 log(2 n^2 pi^2 / (3 delta)) + 2 d log(n^2 d b r sqrt(log(4 d a / delta)))
    """
    if not (r > 0 and a > 0 and b > 0):
        raise ValueError("r, a and b must be positive")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    inner = math.log(4.0 * d * a / delta)
    if inner <= 0:
        raise ValueError(f"log(4 d a / delta) = {inner:.4g} is not positive")
    arg = n * n * d * b * r * math.sqrt(inner)
    if arg <= 0:
        raise ValueError("second log argument is not positive")
    return 2.0 * math.log(2.0 * n * n * math.pi**2 / (3.0 * delta)) + 2.0 * d * math.log(arg)


def randomised_shape(n: int, theta: float) -> float:
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    return math.log((n * n + 1) / math.sqrt(2 * math.pi)) / math.log(1 + theta / 2)


def beta_randomised(n: int, theta: float, rng: np.random.Generator, clamp: bool = False) -> float:
    """One Gamma(shape, scale=theta) draw with the decision-dependent shape.

    The shape is negative at n=1; that raises unless ``clamp`` is set, in
    which case it is floored at ``RANDOMISED_SHAPE_FLOOR`` with a warning.
    """
    shape = randomised_shape(n, theta)
    if shape <= 0:
        if not clamp:
            raise ValueError(f"Gamma shape {shape:.4f} <= 0 at n={n}, theta={theta}")
        log.warning("randomised CB shape %.4f at n=%d clamped to %g", shape, n, RANDOMISED_SHAPE_FLOOR)
        shape = RANDOMISED_SHAPE_FLOOR
    return float(rng.gamma(shape, theta))


def pi_value(mu, sigma, y_best):
    """Probability of improvement below ``y_best``; at sigma=0 the step limit."""
    mu, sigma = np.broadcast_arrays(np.asarray(mu, float), np.asarray(sigma, float))
    delta = y_best - mu
    pos = sigma > 0
    out = np.where(delta > 0, 1.0, 0.0)
    out = np.where(pos, ndtr(np.divide(delta, sigma, where=pos, out=np.zeros_like(delta))), out)
    return out if out.ndim else float(out)


def ei_value(mu, sigma, y_best):
    """Expected improvement below ``y_best``; 0 where sigma=0."""
    mu, sigma = np.broadcast_arrays(np.asarray(mu, float), np.asarray(sigma, float))
    delta = y_best - mu
    pos = sigma > 0
    u = np.divide(delta, sigma, where=pos, out=np.zeros_like(delta))
    pdf = np.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)
    val = delta * ndtr(u) + sigma * pdf
    out = np.where(pos, np.maximum(val, 0.0), 0.0)
    return out if out.ndim else float(out)


def pareto_mask(minimize_obj, maximize_obj) -> np.ndarray:
    """Non-dominated flags for (minimize first, maximize second)."""
    f = np.asarray(minimize_obj, float)
    g = np.asarray(maximize_obj, float)
    # sort by f ascending, ties by g descending; a point survives if no
    # earlier point has g >= its g with one strict inequality
    order = np.lexsort((-g, f))
    mask = np.zeros(f.size, dtype=bool)
    best_g = -np.inf
    best_f_at_g = np.inf
    for i in order:
        if g[i] > best_g:
            mask[i] = True
            best_g, best_f_at_g = g[i], f[i]
        elif g[i] == best_g and f[i] == best_f_at_g:
            mask[i] = True  # exact duplicate of a front point
    return mask


def in_neighborhood(points, center, w: float) -> np.ndarray:
    """Rows of ``points`` inside the hypercube of side ``w`` centred on ``center``."""
    points = np.atleast_2d(points)
    return np.all(np.abs(points - np.asarray(center)) <= w / 2.0, axis=1)


def neighborhood_count(X, center, w: float) -> int:
    return int(np.count_nonzero(in_neighborhood(X, center, w)))


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class AcquisitionPolicy:
    kind: str
    name: str | None = None
    beta: float = 1.0
    delta: float = 0.1
    grid_size: float | None = None  # None -> 100**d
    r: float = 1.0
    a: float = 1.0
    b: float = 1.0
    theta: float = 1.0
    epsilon: float = 0.1
    switch_fraction: float = 0.5
    alternate_start: str = "pi"
    w: float = 0.1
    eta: int | None = None  # None -> 5 * d

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; known: {', '.join(KINDS)}")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.grid_size is not None and self.grid_size < 1:
            raise ValueError("grid_size must be at least 1")
        if not (self.r > 0 and self.a > 0 and self.b > 0):
            raise ValueError("r, a, b must be positive")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0 <= self.switch_fraction <= 1:
            raise ValueError("switch_fraction must lie in [0, 1]")
        if self.alternate_start not in ("pi", "ei"):
            raise ValueError("alternate_start must be 'pi' or 'ei'")
        if not 0 < self.w <= 1:
            raise ValueError("w must lie in (0, 1]")
        if self.eta is not None and self.eta < 1:
            raise ValueError("eta must be at least 1")

    @property
    def id(self) -> str:
        return self.name or self.kind

    def eta_for(self, d: int) -> int:
        return 5 * d if self.eta is None else int(self.eta)

    def grid_size_for(self, d: int) -> float:
        return 100.0**d if self.grid_size is None else float(self.grid_size)

    def describe(self) -> dict:
        """Kind, id, and only the parameters the kind uses."""
        out = {"kind": self.kind, "id": self.id}
        if self.name is not None:
            out["name"] = self.name
        for key in _RELEVANT[self.kind]:
            out[key] = getattr(self, key)
        return out

    @classmethod
    def from_dict(cls, spec: dict) -> "AcquisitionPolicy":
        spec = dict(spec)
        spec.pop("id", None)
        params = spec.pop("params", None) or {}
        spec.update(params)
        known = {f.name for f in fields(cls)}
        unknown = set(spec) - known
        if unknown:
            raise ValueError(f"unknown policy parameters: {sorted(unknown)}")
        return cls(**spec)


def default_policies() -> list[AcquisitionPolicy]:
    """One policy per kind at default settings; mastering comes last."""
    return [AcquisitionPolicy(k) for k in KINDS]


@dataclass(frozen=True)
class Decision:
    x_next: np.ndarray
    kind: str
    acquisition_value: float
    beta_used: float | None = None
    used_sigma: bool = False
    # mastering bookkeeping, recorded so traces can be audited later
    x_exploit: np.ndarray | None = None
    neighborhood_count: int | None = None
    extra: dict = field(default_factory=dict)


class _Surrogate:
    """Model view that notes whether the predictive std was ever requested."""

    def __init__(self, model):
        self.model = model
        self.used_sigma = False

    def mean(self, X):
        return self.model.mean(X)

    def mean_std(self, X):
        self.used_sigma = True
        return self.model.mean_std(X)


def _pi_or_ei(step: int, total_steps: int, policy: AcquisitionPolicy) -> str:
    if policy.kind == "pi":
        return "pi"
    if policy.kind == "ei":
        return "ei"
    if policy.kind == "pi_ei_alternating":
        other = "ei" if policy.alternate_start == "pi" else "pi"
        return policy.alternate_start if step % 2 == 0 else other
    # switching: EI first, PI once the switch point is reached
    return "ei" if step < policy.switch_fraction * total_steps else "pi"


def decide(
    policy: AcquisitionPolicy,
    model: "GpModel",
    data: "Dataset",
    step: int,
    total_steps: int,
    inner: inner_opt.InnerConfig,
    rng: np.random.Generator,
) -> Decision:
    """Choose the next point in the unit cube.

    ``step`` counts BO decisions already made (0 for the first one after the
    initial design) and ``total_steps`` is the number of decisions in the
    run. Confidence-bound schedules use the 1-based index ``step + 1``.

    ``rng`` is split into fixed children, so the inner optimizer sees the
    same stream whatever the policy does with its own coin flips.
    """
    if policy.kind == "mastering":
        return decide_mastering(policy, model, data, None, inner, rng)

    inner_rng, choice_rng, _ = fork(rng, 3)
    X = np.asarray(data.X)
    d = X.shape[1]
    y_best = float(np.min(data.y))
    sur = _Surrogate(model)
    n = step + 1

    kind = policy.kind
    if kind.startswith("cb_"):
        if kind == "cb_const":
            beta = policy.beta
        elif kind == "cb_srinivas_t1":
            beta = beta_srinivas_t1(n, policy.grid_size_for(d), policy.delta)
        elif kind == "cb_srinivas_t2":
            beta = beta_srinivas_t2(n, d, policy.r, policy.a, policy.b, policy.delta)
        else:
            beta = beta_randomised(n, policy.theta, choice_rng, clamp=True)

        def score(Z):
            mu, sd = sur.mean_std(Z)
            return lcb(mu, sd, beta)

        res = inner_opt.minimize(score, d, inner, inner_rng)
        return Decision(res.x, "cb", res.value, beta_used=beta, used_sigma=sur.used_sigma)

    if kind in ("eps_rs", "eps_pf"):
        coin = choice_rng.random()
        if kind == "eps_rs" and coin < policy.epsilon:
            x = uniform(1, d, choice_rng)[0]
            return Decision(x, "random", float(sur.mean(x[None, :])[0]))
        res = inner_opt.minimize(sur.mean, d, inner, inner_rng)
        if kind == "eps_pf" and coin < policy.epsilon:
            mu, sd = sur.mean_std(res.pool)
            front = np.flatnonzero(pareto_mask(mu, sd))
            pick = int(front[choice_rng.integers(front.size)])
            return Decision(
                res.pool[pick].copy(), "pareto_random", float(mu[pick]),
                used_sigma=True, extra={"front_size": int(front.size)},
            )
        return Decision(res.x, "exploit", res.value, used_sigma=sur.used_sigma)

    which = _pi_or_ei(step, total_steps, policy)
    fn = pi_value if which == "pi" else ei_value

    def score(Z):
        mu, sd = sur.mean_std(Z)
        return -fn(mu, sd, y_best)

    res = inner_opt.minimize(score, d, inner, inner_rng)
    return Decision(res.x, which, -res.value, used_sigma=sur.used_sigma)


def decide_mastering(
    policy: AcquisitionPolicy,
    model: "GpModel",
    data: "Dataset",
    idw: IdwField | None,
    inner: inner_opt.InnerConfig,
    rng: np.random.Generator,
) -> Decision:
    """Exploit the GP mean unless that would pile yet another point next to
    an already crowded incumbent; then go where the IDW uncertainty is
    largest instead.
    """
    inner_rng, _, explore_rng = fork(rng, 3)
    X = np.asarray(data.X)
    y = np.asarray(data.y)
    d = X.shape[1]
    sur = _Surrogate(model)

    res = inner_opt.minimize(sur.mean, d, inner, inner_rng)
    x_plus = X[int(np.argmin(y))]
    count = neighborhood_count(X, x_plus, policy.w)
    crowded = bool(in_neighborhood(res.x, x_plus, policy.w)[0]) and count >= policy.eta_for(d)
    if not crowded:
        return Decision(
            res.x, "exploit", res.value, used_sigma=sur.used_sigma,
            x_exploit=res.x, neighborhood_count=count,
        )
    field_ = idw if idw is not None else IdwField(X)
    explore = inner_opt.minimize(lambda Z: -field_(Z), d, inner, explore_rng)
    return Decision(
        explore.x, "explore", -explore.value, used_sigma=sur.used_sigma,
        x_exploit=res.x, neighborhood_count=count,
    )


def decide_exploit(model: "GpModel", d: int, inner: inner_opt.InnerConfig, rng) -> Decision:
    """Pure GP-mean minimization, as used in the final refining phase."""
    inner_rng, _, _ = fork(rng, 3)
    sur = _Surrogate(model)
    res = inner_opt.minimize(sur.mean, d, inner, inner_rng)
    return Decision(res.x, "exploit", res.value, used_sigma=sur.used_sigma)
