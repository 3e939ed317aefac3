"""Sequential BO loops and their traces.

``run_basic`` is the plain fit / acquire / evaluate loop; ``run_mastering``
adds the crowding check during the main phase and ends with a pure
exploitation phase. Both return a :class:`RunTrace` holding every
observation, including the initial design.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import gp
from .acquisition import AcquisitionPolicy, decide, decide_exploit, decide_mastering
from .errors import NumericalError
from .idw import IdwField
from .inner_opt import InnerConfig
from .sampling import fork, lhs, make_rng, uniform
from .testbed import TestProblem, evaluate

__all__ = [
    "Dataset",
    "IterationRecord",
    "RunTrace",
    "run_basic",
    "run_mastering",
    "run_from_seed",
    "default_budget",
    "write_trace",
    "read_trace",
    "TRACE_FORMAT",
]

log = logging.getLogger(__name__)

TRACE_FORMAT = 1
DUPLICATE_TOL = 1e-9
_TIMING_KEYS = ("fit_time", "decide_time", "eval_time")


class Dataset:
    """Evaluated points (unit cube) and observations, in evaluation order."""

    def __init__(self, X, y, n0: int | None = None):
        self.X = np.array(X, dtype=float, ndmin=2)
        self.y = np.array(y, dtype=float).reshape(-1)
        if self.X.shape[0] != self.y.size:
            raise ValueError("X and y lengths differ")
        self.n0 = self.y.size if n0 is None else int(n0)

    def __len__(self):
        return self.y.size

    def append(self, x, y):
        self.X = np.vstack([self.X, np.asarray(x, dtype=float)[None, :]])
        self.y = np.append(self.y, float(y))

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.y))


@dataclass
class IterationRecord:
    iteration: int  # 1-based index of the observation
    phase: str  # init | main | refine
    x_unit: list
    x: list
    y: float
    kind: str = "init"
    acquisition_value: float | None = None
    beta: float | None = None
    used_sigma: bool = False
    x_exploit: list | None = None
    neighborhood_count: int | None = None
    perturbed: bool = False
    hyperparameters: dict | None = None
    fit_time: float = 0.0
    decide_time: float = 0.0
    eval_time: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RunTrace:
    problem: str
    d: int
    policy: dict
    seed: int | None
    n0: int
    budget: int
    noise_sd: float = 0.0
    n1: int | None = None
    n2: int | None = None
    records: list[IterationRecord] = field(default_factory=list)
    status: str = "ok"
    error: str | None = None
    run_id: str | None = None
    settings: dict = field(default_factory=dict)  # inner-opt config and GP noise pin

    @property
    def decisions(self) -> list[IterationRecord]:
        return [r for r in self.records if r.phase != "init"]

    @property
    def X(self) -> np.ndarray:
        return np.array([r.x_unit for r in self.records], dtype=float)

    @property
    def y(self) -> np.ndarray:
        return np.array([r.y for r in self.records], dtype=float)

    @property
    def incumbent_y(self) -> np.ndarray:
        """Best-so-far value after each observation."""
        return np.minimum.accumulate(self.y)

    @property
    def incumbent_x(self) -> np.ndarray:
        y = self.y
        idx = np.zeros(y.size, dtype=int)
        for i in range(1, y.size):
            idx[i] = i if y[i] < y[idx[i - 1]] else idx[i - 1]
        return self.X[idx]

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    def summary(self) -> dict:
        y = self.y
        best = int(np.argmin(y)) if y.size else None
        return {
            "type": "summary",
            "format": TRACE_FORMAT,
            "run_id": self.run_id,
            "problem": self.problem,
            "d": self.d,
            "policy": self.policy,
            "seed": self.seed,
            "n0": self.n0,
            "budget": self.budget,
            "n1": self.n1,
            "n2": self.n2,
            "noise_sd": self.noise_sd,
            "status": self.status,
            "error": self.error,
            "n_decisions": len(self.decisions),
            "best_y": float(y[best]) if best is not None else None,
            "best_x_unit": self.records[best].x_unit if best is not None else None,
            "settings": self.settings,
        }

    def fingerprint(self) -> str:
        """Everything except wall-clock timings, as canonical JSON."""
        recs = []
        for r in self.records:
            d = r.to_dict()
            for k in _TIMING_KEYS:
                d.pop(k)
            recs.append(d)
        return json.dumps({"summary": self.summary(), "records": recs}, sort_keys=True)


def default_budget(d: int, n0_mult: int = 5, N_mult: int = 20, N1_mult: int = 15, N2_mult: int = 5):
    """(n0, N, N1, N2) as multiples of the dimension."""
    return n0_mult * d, N_mult * d, N1_mult * d, N2_mult * d


def _observe(problem: TestProblem, u, rng):
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    x = problem.space.from_unit(u)
    # from_unit can overshoot the upper bound by an ulp
    x = np.clip(x, problem.space.lower, problem.space.upper)
    return u, x, evaluate(problem, x, rng)


def _init_trace(problem, policy, init, budget, rng, seed, n1=None, n2=None):
    init = np.atleast_2d(np.asarray(init, dtype=float))
    trace = RunTrace(
        problem=problem.name,
        d=problem.d,
        policy=policy.describe(),
        seed=seed,
        n0=init.shape[0],
        budget=int(budget),
        noise_sd=problem.noise_sd,
        n1=n1,
        n2=n2,
    )
    ys = []
    for i, u in enumerate(init):
        t0 = time.perf_counter()
        u, x, y = _observe(problem, u, rng)
        trace.records.append(
            IterationRecord(i + 1, "init", u.tolist(), x.tolist(), y, eval_time=time.perf_counter() - t0)
        )
        ys.append(y)
    return trace, Dataset(init, ys)


def _guard_duplicate(x, X, rng):
    d2 = np.min(np.sum((X - x) ** 2, axis=1))
    if d2 <= DUPLICATE_TOL**2:
        log.info("decision duplicates an evaluated point; resampling uniformly")
        return uniform(1, X.shape[1], rng)[0], True
    return x, False


def _loop(problem, policy, trace, data, rng, inner, gp_noise, phases):
    """Run ``phases`` = [(phase_name, n_decisions), ...] in order."""
    d = problem.d
    total = sum(n for _, n in phases)
    step = 0
    for phase, count in phases:
        for _ in range(count):
            gp_rng, decide_rng, guard_rng, noise_rng = fork(rng, 4)
            t0 = time.perf_counter()
            try:
                model = gp.fit(data.X, data.y, gp_rng, noise_variance=gp_noise)
            except NumericalError as exc:
                trace.status = "failed"
                trace.error = f"GP fit failed at iteration {len(data) + 1}: {exc}"
                log.error("%s / %s: %s", problem.name, policy.id, trace.error)
                return trace
            t1 = time.perf_counter()
            if phase == "refine":
                dec = decide_exploit(model, d, inner, decide_rng)
            elif policy.kind == "mastering":
                dec = decide_mastering(policy, model, data, IdwField(data.X), inner, decide_rng)
            else:
                dec = decide(policy, model, data, step, total, inner, decide_rng)
            t2 = time.perf_counter()
            x_next, perturbed = _guard_duplicate(dec.x_next, data.X, guard_rng)
            u, x, y = _observe(problem, x_next, noise_rng)
            t3 = time.perf_counter()
            data.append(u, y)
            trace.records.append(
                IterationRecord(
                    iteration=len(data),
                    phase=phase,
                    x_unit=u.tolist(),
                    x=x.tolist(),
                    y=y,
                    kind=dec.kind,
                    acquisition_value=float(dec.acquisition_value),
                    beta=dec.beta_used,
                    used_sigma=dec.used_sigma,
                    x_exploit=None if dec.x_exploit is None else np.asarray(dec.x_exploit).tolist(),
                    neighborhood_count=dec.neighborhood_count,
                    perturbed=perturbed,
                    hyperparameters=model.hyperparameters,
                    fit_time=t1 - t0,
                    decide_time=t2 - t1,
                    eval_time=t3 - t2,
                )
            )
            step += 1
    return trace


def run_basic(
    problem: TestProblem,
    policy: AcquisitionPolicy,
    budget: int,
    init,
    rng: np.random.Generator,
    inner: InnerConfig | None = None,
    gp_noise: float | None = None,
    seed: int | None = None,
    init_rng: np.random.Generator | None = None,
) -> RunTrace:
    """Plain BO: ``budget - len(init)`` decisions by ``policy``.

    ``init_rng`` only feeds observation noise on the initial design; it
    defaults to ``rng``.
    """
    if policy.kind == "mastering":
        raise ValueError("use run_mastering for the mastering policy")
    inner = inner or InnerConfig()
    trace, data = _init_trace(problem, policy, init, budget, init_rng or rng, seed)
    if budget < trace.n0:
        raise ValueError(f"budget {budget} is smaller than the initial design ({trace.n0})")
    return _loop(problem, policy, trace, data, rng, inner, gp_noise, [("main", budget - trace.n0)])


def run_mastering(
    problem: TestProblem,
    policy: AcquisitionPolicy,
    n1: int,
    n2: int,
    init,
    rng: np.random.Generator,
    inner: InnerConfig | None = None,
    gp_noise: float | None = None,
    seed: int | None = None,
    init_rng: np.random.Generator | None = None,
) -> RunTrace:
    """Crowding-aware BO up to ``n1`` observations, then ``n2`` exploit-only steps."""
    if policy.kind != "mastering":
        raise ValueError("run_mastering needs a mastering policy")
    if n2 < 0:
        raise ValueError("n2 must be nonnegative")
    inner = inner or InnerConfig()
    trace, data = _init_trace(problem, policy, init, n1 + n2, init_rng or rng, seed, n1=n1, n2=n2)
    if n1 < trace.n0:
        raise ValueError(f"n1={n1} is smaller than the initial design ({trace.n0})")
    phases = [("main", n1 - trace.n0), ("refine", n2)]
    return _loop(problem, policy, trace, data, rng, inner, gp_noise, phases)


def run_from_seed(
    problem: TestProblem,
    policy: AcquisitionPolicy,
    seed: int,
    n0: int,
    budget: int,
    n1: int | None = None,
    n2: int | None = None,
    inner: InnerConfig | None = None,
    gp_noise: float | None = None,
    run_id: str | None = None,
) -> RunTrace:
    """One complete run whose randomness is fixed by ``seed`` alone.

    The initial design depends only on ``seed`` and ``n0``, so every policy
    run with the same seed starts from the same points.
    """
    design_rng, init_noise_rng, loop_rng = fork(make_rng(seed), 3)
    init = lhs(n0, problem.d, design_rng)
    if policy.kind == "mastering":
        if n1 is None or n2 is None:
            n2 = budget // 4 if n2 is None else n2
            n1 = budget - n2 if n1 is None else n1
        trace = run_mastering(
            problem, policy, n1, n2, init, loop_rng, inner, gp_noise, seed, init_noise_rng
        )
    else:
        trace = run_basic(problem, policy, budget, init, loop_rng, inner, gp_noise, seed, init_noise_rng)
    trace.run_id = run_id
    trace.settings = {
        "inner": asdict(inner or InnerConfig()),
        "gp_noise": gp_noise,
    }
    return trace


# ---------------------------------------------------------------------------
# persistence: one JSON object per line, iterations first, summary last


def trace_lines(trace: RunTrace) -> list[str]:
    lines = []
    for r in trace.records:
        rec = {"type": "iteration", "run_id": trace.run_id}
        rec.update(r.to_dict())
        lines.append(json.dumps(rec))
    lines.append(json.dumps(trace.summary()))
    return lines


def write_trace(trace: RunTrace, path) -> Path:
    """Write atomically (temp file in the same directory, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write("\n".join(trace_lines(trace)) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_trace(path) -> RunTrace:
    records, summary = [], None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            kind = obj.pop("type")
            if kind == "iteration":
                obj.pop("run_id", None)
                records.append(IterationRecord(**obj))
            elif kind == "summary":
                summary = obj
    if summary is None:
        raise ValueError(f"{path}: no summary record (incomplete trace)")
    return RunTrace(
        problem=summary["problem"],
        d=summary["d"],
        policy=summary["policy"],
        seed=summary["seed"],
        n0=summary["n0"],
        budget=summary["budget"],
        noise_sd=summary["noise_sd"],
        n1=summary["n1"],
        n2=summary["n2"],
        records=records,
        status=summary["status"],
        error=summary["error"],
        run_id=summary["run_id"],
        settings=summary.get("settings") or {},
    )
