"""Audit recorded traces against the objective and against their seed."""

from __future__ import annotations

from dataclasses import dataclass

from ..acquisition import AcquisitionPolicy
from ..engine import RunTrace, read_trace, run_from_seed
from ..inner_opt import InnerConfig
from ..testbed import evaluate, get_problem

REPLAY_TOL = 1e-9


class IntegrityError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReplayReport:
    status: str  # ok | noisy run | integrity failure
    max_deviation: float | None
    iterations: int
    failed_iteration: int | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _problem_for(trace: RunTrace):
    return get_problem(trace.problem, d=trace.d)


def replay(trace_or_path, raise_on_failure: bool = False) -> ReplayReport:
    """Re-evaluate the objective at every recorded point and compare."""
    trace = trace_or_path if isinstance(trace_or_path, RunTrace) else read_trace(trace_or_path)
    if trace.noise_sd > 0:
        return ReplayReport("noisy run", None, len(trace.records),
                            message="trace has observation noise; values cannot be replayed")
    problem = _problem_for(trace)
    worst = 0.0
    for rec in trace.records:
        y = evaluate(problem, rec.x)
        dev = abs(y - rec.y)
        worst = max(worst, dev)
        if not dev <= REPLAY_TOL:
            msg = f"iteration {rec.iteration}: recorded y={rec.y!r}, objective gives {y!r}"
            if raise_on_failure:
                raise IntegrityError(msg)
            return ReplayReport("integrity failure", dev, len(trace.records), rec.iteration, msg)
    return ReplayReport("ok", worst, len(trace.records))


def reexecute(trace_or_path) -> RunTrace:
    """Run the same configuration again from the trace's recorded seed."""
    trace = trace_or_path if isinstance(trace_or_path, RunTrace) else read_trace(trace_or_path)
    if trace.seed is None:
        raise ValueError("trace has no recorded seed")
    problem = _problem_for(trace)
    if trace.noise_sd:
        problem = problem.with_noise(trace.noise_sd)
    settings = trace.settings or {}
    return run_from_seed(
        problem,
        AcquisitionPolicy.from_dict(trace.policy),
        trace.seed,
        trace.n0,
        trace.budget,
        n1=trace.n1,
        n2=trace.n2,
        inner=InnerConfig(**settings.get("inner", {})),
        gp_noise=settings.get("gp_noise"),
        run_id=trace.run_id,
    )
