"""Batch execution over (problem, policy, run) and summary tables.

Layout under the output directory::

    manifest.json
    table1.csv                         Pareto-optimal policies per problem
    <problem>/summary.csv              per-policy metrics
    <problem>/pareto.csv               a_gap vs mean D_L2 with dominance flag
    <problem>/<policy>/run_000.jsonl   one trace per run
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..acquisition import AcquisitionPolicy
from ..engine import read_trace, run_from_seed, write_trace
from ..inner_opt import InnerConfig
from ..metrics import ParetoPoint, a_gap, gap_curve, l2_discrepancy, mean_curve, pareto_front
from ..sampling import derive_seed
from .config import ExperimentConfig, ProblemSpec

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "problem",
    "policy",
    "runs",
    "failed",
    "a_gap",
    "d_l2_mean",
    "d_l2_median",
    "final_gap_q1",
    "final_gap_median",
    "final_gap_q3",
    "final_gap_mean",
    "dominated",
]


@dataclass(frozen=True)
class Task:
    problem: ProblemSpec
    policy: dict
    run: int
    seed: int
    n0: int
    budget: int
    n1: int
    n2: int
    inner: dict
    gp_noise: float | None
    path: str

    @property
    def run_id(self) -> str:
        return f"{self.problem.name}/{self.policy['id']}/{self.run:03d}"


@dataclass
class ExperimentResult:
    out: Path
    traces: list[Path] = field(default_factory=list)
    failed: list[str] = field(default_factory=list)
    skipped: int = 0

    @property
    def ok(self) -> bool:
        return not self.failed


def run_seed(master_seed: int, problem: str, run: int) -> int:
    return derive_seed(master_seed, problem, run)


def trace_path(out, problem: str, policy_id: str, run: int) -> Path:
    return Path(out) / problem / policy_id / f"run_{run:03d}.jsonl"


def plan(cfg: ExperimentConfig) -> list[Task]:
    tasks = []
    for spec in cfg.problems:
        d = spec.build().d
        n0, N, n1, n2 = cfg.budget.for_dim(d)
        for policy in cfg.policies:
            desc = policy.describe()
            for r in range(cfg.runs):
                tasks.append(
                    Task(
                        problem=spec,
                        policy=desc,
                        run=r,
                        seed=run_seed(cfg.master_seed, spec.name, r),
                        n0=n0,
                        budget=N,
                        n1=n1,
                        n2=n2,
                        inner=asdict(cfg.inner),
                        gp_noise=cfg.gp_noise,
                        path=str(trace_path(cfg.out, spec.name, policy.id, r)),
                    )
                )
    return tasks


def execute(task: Task) -> tuple[str, str]:
    """Run one task and write its trace. Returns ``(path, status)``."""
    problem = task.problem.build()
    policy = AcquisitionPolicy.from_dict(task.policy)
    trace = run_from_seed(
        problem,
        policy,
        task.seed,
        task.n0,
        task.budget,
        n1=task.n1,
        n2=task.n2,
        inner=InnerConfig(**task.inner),
        gp_noise=task.gp_noise,
        run_id=task.run_id,
    )
    write_trace(trace, task.path)
    return task.path, trace.status


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_manifest(cfg: ExperimentConfig):
    out = Path(cfg.out)
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.experiment_hash(),
        "version": __version__,
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    """Execute every missing trace, then (re)write all summaries.

    Completed traces are left alone, so an interrupted experiment resumes
    where it stopped and ends with the same bundle.
    """
    workers = workers or cfg.workers
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg)

    tasks = plan(cfg)
    todo = [t for t in tasks if not Path(t.path).exists()]
    result = ExperimentResult(out=out, skipped=len(tasks) - len(todo))
    if result.skipped:
        log.info("resuming: %d of %d runs already on disk", result.skipped, len(tasks))

    def done(i, path, status):
        log.info("[%d/%d] %s %s", i, len(todo), Path(path).relative_to(out), status)

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, (path, status) in enumerate(pool.map(execute, todo), 1):
                done(i, path, status)
    else:
        for i, task in enumerate(todo, 1):
            path, status = execute(task)
            done(i, path, status)

    for t in tasks:
        result.traces.append(Path(t.path))
    summarize(cfg, result)
    return result


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


@dataclass
class PolicyRuns:
    policy: str
    curves: list = field(default_factory=list)
    discrepancies: list = field(default_factory=list)
    final_gaps: list = field(default_factory=list)
    failed: int = 0
    runs: int = 0


def collect(cfg: ExperimentConfig, spec: ProblemSpec) -> list[PolicyRuns]:
    """Load every trace of one problem, grouped by policy (config order)."""
    problem = spec.build()
    groups = []
    missing = []
    for policy in cfg.policies:
        g = PolicyRuns(policy.id)
        for r in range(cfg.runs):
            path = trace_path(cfg.out, spec.name, policy.id, r)
            if not path.exists():
                missing.append(str(path))
                continue
            trace = read_trace(path)
            g.runs += 1
            if trace.failed:
                g.failed += 1
                continue
            curve = gap_curve(trace, problem.y_star)
            g.curves.append(curve.values)
            g.final_gaps.append(float(curve.values[-1]) if curve.values.size else 1.0)
            g.discrepancies.append(l2_discrepancy(trace.X))
        groups.append(g)
    if missing:
        raise FileNotFoundError("missing runs:\n  " + "\n  ".join(missing))
    return groups


def problem_summary(cfg: ExperimentConfig, spec: ProblemSpec) -> tuple[list[dict], list[ParetoPoint]]:
    groups = collect(cfg, spec)
    points, rows = [], []
    for g in groups:
        if not g.curves:
            rows.append(None)
            continue
        mean_c = mean_curve(g.curves)
        row = {
            "problem": spec.name,
            "policy": g.policy,
            "runs": g.runs,
            "failed": g.failed,
            "a_gap": a_gap(mean_c),
            "d_l2_mean": float(np.mean(g.discrepancies)),
            "d_l2_median": float(np.median(g.discrepancies)),
            "final_gap_q1": float(np.quantile(g.final_gaps, 0.25)),
            "final_gap_median": float(np.median(g.final_gaps)),
            "final_gap_q3": float(np.quantile(g.final_gaps, 0.75)),
            "final_gap_mean": float(np.mean(g.final_gaps)),
        }
        rows.append(row)
        points.append(ParetoPoint(g.policy, row["a_gap"], row["d_l2_mean"]))
    annotated, _ = pareto_front(points)
    flags = {p.policy: p.dominated for p in annotated}
    rows = [r for r in rows if r is not None]
    for r in rows:
        r["dominated"] = flags[r["policy"]]
    return rows, annotated


def summarize(cfg: ExperimentConfig, result: ExperimentResult | None = None) -> dict:
    """Write per-problem summary/pareto tables and the cross-problem table."""
    out = Path(cfg.out)
    table = {}
    failed = []
    for spec in cfg.problems:
        rows, annotated = problem_summary(cfg, spec)
        _atomic_write(out / spec.name / "summary.csv", _csv(rows, SUMMARY_COLUMNS))
        pareto_rows = [
            {"policy": p.policy, "a_gap": p.a_gap, "d_l2_mean": p.d_l2, "dominated": p.dominated}
            for p in annotated
        ]
        _atomic_write(
            out / spec.name / "pareto.csv",
            _csv(pareto_rows, ["policy", "a_gap", "d_l2_mean", "dominated"]),
        )
        table[spec.name] = {p.policy: not p.dominated for p in annotated}
        for r in rows:
            if r["failed"]:
                failed.append(f"{spec.name}/{r['policy']}: {r['failed']} failed run(s)")

    ids = [p.id for p in cfg.policies]
    lines = [["problem"] + ids]
    for spec in cfg.problems:
        lines.append([spec.name] + ["x" if table[spec.name].get(i) else "" for i in ids])
    counts = [sum(bool(table[s.name].get(i)) for s in cfg.problems) for i in ids]
    lines.append(["pareto_optimal"] + [f"{c}/{len(cfg.problems)}" for c in counts])
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(lines)
    _atomic_write(out / "table1.csv", buf.getvalue())

    if result is not None:
        result.failed.extend(failed)
    return table


def load_manifest_config(out) -> ExperimentConfig:
    """Rebuild the config an output directory was produced with."""
    from .config import from_dict

    manifest = json.loads((Path(out) / "manifest.json").read_text())
    raw = dict(manifest["config"])
    raw["policies"] = [dict(p) for p in raw["policies"]]
    raw["out"] = str(out)
    return from_dict(raw)
