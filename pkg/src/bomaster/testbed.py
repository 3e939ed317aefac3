"""Global optimization test functions used by the benchmark.

Every problem is stated as a minimization over a box in its original
units. ``SearchSpace`` carries the affine map to and from the unit cube,
which is where the optimizer works.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

__all__ = [
    "DomainError",
    "SearchSpace",
    "TestProblem",
    "evaluate",
    "catalog",
    "get_problem",
    "problem_names",
    "manifest",
]


class DomainError(ValueError):
    """Raised when a point falls outside a problem's box."""


@dataclass(frozen=True)
class SearchSpace:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or lower.size == 0:
            raise ValueError("lower and upper must be non-empty and of equal length")
        if np.any(lower >= upper):
            k = int(np.argmax(lower >= upper))
            raise ValueError(f"lower[{k}]={lower[k]} is not below upper[{k}]={upper[k]}")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def d(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def from_unit(self, u):
        """Map unit-cube points (last axis of length d) to original units."""
        return self.lower + np.asarray(u, dtype=float) * self.width

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.lower) / self.width

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class TestProblem:
    """A named objective over a box with a known optimum.

    ``objective`` takes a 1-d array in original units and returns a float
    in the problem's natural sense; ``minimize=False`` problems are negated
    by :meth:`value` so everything downstream minimizes.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    space: SearchSpace
    objective: Callable[[np.ndarray], float]
    y_star: float
    x_star: np.ndarray
    minimize: bool = True
    noise_sd: float = 0.0
    parametric: bool = field(default=False, compare=False)

    @property
    def d(self) -> int:
        return self.space.d

    def value(self, x) -> float:
        """Noise-free objective, sign-normalized to minimization."""
        f = float(self.objective(np.asarray(x, dtype=float)))
        return f if self.minimize else -f

    def with_noise(self, noise_sd: float) -> "TestProblem":
        if noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        return replace(self, noise_sd=float(noise_sd))


def evaluate(problem: TestProblem, x, rng: np.random.Generator | None = None) -> float:
    """Observe ``f(x) + eps`` with ``eps ~ N(0, noise_sd**2)``.

    ``x`` is in original units. No random draw happens when the problem is
    noise-free, so ``rng`` may be omitted in that case.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    space = problem.space
    if x.size != space.d:
        raise DomainError(f"{problem.name}: expected {space.d} coordinates, got {x.size}")
    bad = np.flatnonzero(~((x >= space.lower) & (x <= space.upper)))
    if bad.size:
        k = int(bad[0])
        raise DomainError(
            f"{problem.name}: coordinate {k} = {x[k]!r} outside "
            f"[{space.lower[k]!r}, {space.upper[k]!r}]"
        )
    y = problem.value(x)
    if problem.noise_sd > 0:
        if rng is None:
            raise ValueError("a random stream is required for noisy evaluation")
        y += problem.noise_sd * float(rng.standard_normal())
    return y


# ---------------------------------------------------------------------------
# closed forms


def branin(x):
    x1, x2 = x
    b = 5.1 / (4 * np.pi**2)
    c = 5 / np.pi
    t = 1 / (8 * np.pi)
    return (x2 - b * x1**2 + c * x1 - 6) ** 2 + 10 * (1 - t) * np.cos(x1) + 10


def three_hump_camel(x):
    x1, x2 = x
    return 2 * x1**2 - 1.05 * x1**4 + x1**6 / 6 + x1 * x2 + x2**2


def six_hump_camel(x):
    x1, x2 = x
    return (4 - 2.1 * x1**2 + x1**4 / 3) * x1**2 + x1 * x2 + (-4 + 4 * x2**2) * x2**2


def goldstein_price(x):
    x1, x2 = x
    a = 1 + (x1 + x2 + 1) ** 2 * (
        19 - 14 * x1 + 3 * x1**2 - 14 * x2 + 6 * x1 * x2 + 3 * x2**2
    )
    b = 30 + (2 * x1 - 3 * x2) ** 2 * (
        18 - 32 * x1 + 12 * x1**2 + 48 * x2 - 36 * x1 * x2 + 27 * x2**2
    )
    return a * b


_HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN3_A = np.array(
    [[3.0, 10, 30], [0.1, 10, 35], [3.0, 10, 30], [0.1, 10, 35]]
)
_HARTMANN3_P = 1e-4 * np.array(
    [[3689, 1170, 2673], [4699, 4387, 7470], [1091, 8732, 5547], [381, 5743, 8828]]
)
_HARTMANN6_A = np.array(
    [
        [10, 3, 17, 3.5, 1.7, 8],
        [0.05, 10, 17, 0.1, 8, 14],
        [3, 3.5, 1.7, 10, 17, 8],
        [17, 8, 0.05, 10, 0.1, 14],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


def _hartmann(A, P):
    def f(x):
        inner = np.sum(A * (np.asarray(x) - P) ** 2, axis=1)
        return -float(np.sum(_HARTMANN_ALPHA * np.exp(-inner)))

    return f


hartmann3 = _hartmann(_HARTMANN3_A, _HARTMANN3_P)
# 4-d variant: first four columns of the 6-d constants, no rescaling
hartmann4 = _hartmann(_HARTMANN6_A[:, :4], _HARTMANN6_P[:, :4])
hartmann6 = _hartmann(_HARTMANN6_A, _HARTMANN6_P)


def rosenbrock(x):
    x = np.asarray(x)
    return float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (x[:-1] - 1) ** 2))


def schwefel(x):
    x = np.asarray(x)
    return float(418.9829 * x.size - np.sum(x * np.sin(np.sqrt(np.abs(x)))))


def styblinski_tang(x):
    x = np.asarray(x)
    return float(0.5 * np.sum(x**4 - 16 * x**2 + 5 * x))


# ---------------------------------------------------------------------------
# catalog

_SCHWEFEL_XSTAR = 420.96874657644923
_STYBTANG_XSTAR = -2.9035340240061283


def _box(lo, hi, d):
    return SearchSpace(np.full(d, lo, dtype=float), np.full(d, hi, dtype=float))


def _fixed(name, f, lower, upper, x_star):
    x_star = np.asarray(x_star, dtype=float)
    x_star.setflags(write=False)
    return TestProblem(
        name=name,
        space=SearchSpace(lower, upper),
        objective=f,
        y_star=float(f(x_star)),
        x_star=x_star,
    )


def rosenbrock_problem(d: int = 2) -> TestProblem:
    x_star = np.ones(d)
    return TestProblem("Rosenbrock", _box(-5.0, 10.0, d), rosenbrock, 0.0, x_star, parametric=True)


def schwefel_problem(d: int = 2) -> TestProblem:
    x_star = np.full(d, _SCHWEFEL_XSTAR)
    return TestProblem(
        "Schwefel", _box(-500.0, 500.0, d), schwefel, schwefel(x_star), x_star, parametric=True
    )


def stybtang_problem(d: int = 2) -> TestProblem:
    x_star = np.full(d, _STYBTANG_XSTAR)
    return TestProblem(
        "StybTang", _box(-5.0, 5.0, d), styblinski_tang, styblinski_tang(x_star), x_star,
        parametric=True,
    )


def _build_catalog() -> list[TestProblem]:
    return [
        _fixed("Branin", branin, [-5.0, 0.0], [10.0, 15.0], [np.pi, 2.275]),
        # "Camel3" / "Camel6" are the standard 2-d three- and six-hump camels
        _fixed("Camel3", three_hump_camel, [-5.0, -5.0], [5.0, 5.0], [0.0, 0.0]),
        _fixed(
            "Camel6", six_hump_camel, [-3.0, -2.0], [3.0, 2.0],
            [0.08984200893527233, -0.712656403019058],
        ),
        _fixed("GoldPr", goldstein_price, [-2.0, -2.0], [2.0, 2.0], [0.0, -1.0]),
        _fixed(
            "Hartmann3", hartmann3, np.zeros(3), np.ones(3),
            [0.11458887741214975, 0.5556488951392669, 0.8525469845276534],
        ),
        _fixed(
            "Hartmann4", hartmann4, np.zeros(4), np.ones(4),
            [0.18739527322275723, 0.19415153088759401, 0.5579177802512827, 0.26477962419807943],
        ),
        _fixed(
            "Hartmann6", hartmann6, np.zeros(6), np.ones(6),
            [
                0.20168950308154784, 0.15001069256125274, 0.47687397826899963,
                0.2753324293380429, 0.31165161699824356, 0.6573005342028397,
            ],
        ),
        rosenbrock_problem(2),
        schwefel_problem(2),
        stybtang_problem(2),
    ]


_PARAMETRIC = {
    "Rosenbrock": rosenbrock_problem,
    "Schwefel": schwefel_problem,
    "StybTang": stybtang_problem,
}

_CATALOG = _build_catalog()


def catalog() -> list[TestProblem]:
    """The ten benchmark problems, noise-free, at their default dimension."""
    return list(_CATALOG)


def problem_names() -> list[str]:
    return [p.name for p in _CATALOG]


def get_problem(name: str, d: int | None = None, noise_sd: float = 0.0) -> TestProblem:
    """Look up a problem by name, optionally overriding ``d`` and the noise level.

    Only Rosenbrock, Schwefel and StybTang accept a dimension override.
    """
    for p in _CATALOG:
        if p.name == name:
            break
    else:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(problem_names())}")
    if d is not None and d != p.d:
        if name not in _PARAMETRIC:
            raise ValueError(f"{name} has fixed dimension {p.d}")
        p = _PARAMETRIC[name](int(d))
    if noise_sd:
        p = p.with_noise(noise_sd)
    return p


def manifest(problems: list[TestProblem] | None = None) -> list[dict]:
    """Machine-readable description of the problems (JSON-serializable)."""
    problems = catalog() if problems is None else problems
    return [
        {
            "name": p.name,
            "d": p.d,
            "lower": p.space.lower.tolist(),
            "upper": p.space.upper.tolist(),
            "y_star": p.y_star,
            "x_star": np.asarray(p.x_star).tolist(),
            "minimize": p.minimize,
            "noise_sd": p.noise_sd,
        }
        for p in problems
    ]
