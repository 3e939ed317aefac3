"""Acceptance criteria 1-9, one verdict line each (see the session summary).

Criteria 6-9 share a desk-scale bundle: Branin, Schwefel and StybTang (d=2,
n0=10, N=40; mastering N1=30, N2=10), 10 runs, all eleven default policies,
master seed 20230515. The bundle is built once per session into a temporary
directory; set BOMASTER_DESK_OUT to reuse (or keep) a bundle directory.
"""

import csv
import os
import time
from pathlib import Path

import numpy as np
import pytest

from bomaster.acquisition import AcquisitionPolicy, decide, decide_exploit, in_neighborhood
from bomaster.engine import Dataset, read_trace, run_from_seed
from bomaster.gp import condition, fit
from bomaster.harness import config as config_mod
from bomaster.harness.replay import reexecute, replay
from bomaster.harness.runner import run_experiment, trace_path
from bomaster.idw import IdwField, z
from bomaster.inner_opt import InnerConfig
from bomaster.metrics import l2_discrepancy, l2_discrepancy_mc
from bomaster.sampling import lhs, make_rng
from bomaster.testbed import catalog, get_problem

from conftest import record_acceptance
from test_gp import dense_posterior, random_instance

DESK_PROBLEMS = ["Branin", "Schwefel", "StybTang"]
DESK_SEED = 20230515


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    out = os.environ.get("BOMASTER_DESK_OUT") or str(tmp_path_factory.mktemp("desk"))
    cfg = config_mod.from_dict(
        {"profile": "desk", "master_seed": DESK_SEED, "problems": DESK_PROBLEMS, "out": out}
    )
    t0 = time.perf_counter()
    result = run_experiment(cfg)
    return cfg, result, time.perf_counter() - t0


def summary_rows(cfg, problem):
    with open(Path(cfg.out) / problem / "summary.csv", newline="") as fh:
        return {r["policy"]: r for r in csv.DictReader(fh)}


# -- 1 -----------------------------------------------------------------------


def test_criterion_1_gp_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        X, y, sf2, ell, noise = random_instance(rng)
        m = condition(X, y, sf2, ell, noise)
        Xs = rng.random((10, X.shape[1]))
        mu, sd = m.mean_std(Xs)
        mu_o, var_o = dense_posterior(X, y, sf2, ell, noise + m.jitter, Xs)
        worst = max(worst, np.max(np.abs(mu - mu_o)), np.max(np.abs(sd**2 - np.maximum(var_o, 0))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 10
    record_acceptance(1, ok, f"max |Cholesky - inverse| = {worst:.2e} (tol 1e-8) over 100 instances, {elapsed:.1f}s")
    assert ok


# -- 2 -----------------------------------------------------------------------


def _interpolation_errors():
    rows = []
    for p in catalog():
        rng = make_rng(0)
        U = lhs(10, p.d, rng)
        y = np.array([p.value(x) for x in p.space.from_unit(U)])
        m = fit(U, y, rng, noise_variance=0.0)
        mu, sd = m.mean_std(U)
        rows.append((p.name, float(np.max(np.abs(mu - y))), float(sd.max()), m.target_sd))
    return rows


@pytest.mark.xfail(
    strict=True,
    reason="absolute sigma <= 1e-4 is below the 1e-10 jitter floor times the target scale "
    "on 7 of 10 functions; see the decisions ledger",
)
def test_criterion_2_interpolation_absolute_units():
    t0 = time.perf_counter()
    rows = _interpolation_errors()
    bad = [f"{n}(|dmu|={e:.1e}, sigma={s:.1e})" for n, e, s, _ in rows if not (e <= 1e-6 and s <= 1e-4)]
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 30
    record_acceptance(
        2, ok,
        f"absolute units: {10 - len(bad)}/10 functions within |mu-y|<=1e-6, sigma<=1e-4"
        + (f"; failing: {', '.join(bad)}" if bad else "")
        + f"; {elapsed:.1f}s",
    )
    assert ok


def test_criterion_2_interpolation_standardized_units():
    # same check in the model's standardized target units, where the tolerances
    # are scale-free; this is reported alongside, not instead of, the line above
    rows = _interpolation_errors()
    worst_mu = max(e / sd for _, e, _, sd in rows)
    worst_sigma = max(s / sd for _, _, s, sd in rows)
    print(f"criterion 2 (standardized units): max |mu-y|/sd_y = {worst_mu:.1e}, max sigma/sd_y = {worst_sigma:.1e}")
    assert worst_mu <= 1e-6 and worst_sigma <= 1e-4


# -- 3 -----------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_3_discrepancy_closed_form_vs_monte_carlo():
    t0 = time.perf_counter()
    rng = np.random.default_rng(33)
    worst = 0.0
    misses = 0
    for i in range(20):
        d = int(rng.integers(1, 5))
        m = int(rng.integers(1, 51))
        X = rng.random((m, d))
        est, se = l2_discrepancy_mc(X, 1_000_000, make_rng(1000 + i))
        z_score = abs(est - l2_discrepancy(X) ** 2) / se
        worst = max(worst, z_score)
        misses += z_score > 3
    elapsed = time.perf_counter() - t0
    ok = misses == 0 and elapsed < 300
    record_acceptance(3, ok, f"20 point sets, 10^6 boxes each: worst deviation {worst:.2f} SE (tol 3), {elapsed:.0f}s")
    assert ok


# -- 4 -----------------------------------------------------------------------


def test_criterion_4_idw_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    checks = []
    for _ in range(20):
        X = rng.random((int(rng.integers(1, 12)), int(rng.integers(1, 5))))
        f = IdwField(X)
        checks.append(np.all(f(X) == 0.0))
        vals = f(rng.random((200, X.shape[1])))
        checks.append(np.all((vals >= 0) & (vals < 1)))
    for c in rng.random(10):
        f = IdwField([[c]])
        # radial: z grows with distance on both sides of the single data point
        r = np.linspace(1e-3, 1.0, 50)
        checks.append(np.all(np.diff(f((c + r)[:, None])) > 0))
        checks.append(np.all(np.diff(f((c - r)[:, None])) > 0))
    spot = z(IdwField([[0.0]]), [1.0])
    spot_err = abs(spot - 2 / np.pi * np.arctan(np.e))
    checks.append(spot_err <= 1e-12)
    elapsed = time.perf_counter() - t0
    ok = all(checks) and elapsed < 1
    record_acceptance(4, ok, f"{sum(checks)}/{len(checks)} property checks, z(1;{{0}}) error {spot_err:.1e}, {elapsed:.2f}s")
    assert ok


# -- 5 -----------------------------------------------------------------------


def test_criterion_5_degenerate_parameter_identities():
    t0 = time.perf_counter()
    problem = get_problem("Branin")
    inner = InnerConfig(n_candidates=100, n_refine=2)
    failures = []

    # decision level on fitted models
    for s in range(5):
        rng = make_rng(s)
        X = lhs(12, 2, rng)
        y = np.array([problem.value(x) for x in problem.space.from_unit(X)])
        model, data = fit(X, y, rng), Dataset(X, y, 12)
        greedy = decide_exploit(model, 2, inner, make_rng(100 + s)).x_next
        for name, pol in [
            ("eps_rs(0)", AcquisitionPolicy("eps_rs", epsilon=0.0)),
            ("eps_pf(0)", AcquisitionPolicy("eps_pf", epsilon=0.0)),
            ("cb_const(beta=0)", AcquisitionPolicy("cb_const", beta=0.0)),
        ]:
            if not np.array_equal(decide(pol, model, data, s, 20, inner, make_rng(100 + s)).x_next, greedy):
                failures.append(f"{name} seed {s}")

    # whole runs under one seed
    def xs(policy):
        return run_from_seed(problem, policy, 99, 6, 14, inner=inner).X

    greedy_run = xs(AcquisitionPolicy("eps_rs", epsilon=0.0))
    for name, pol in [
        ("eps_pf(0) run", AcquisitionPolicy("eps_pf", epsilon=0.0)),
        ("cb_const(beta=0) run", AcquisitionPolicy("cb_const", beta=0.0)),
    ]:
        if not np.array_equal(xs(pol), greedy_run):
            failures.append(name)
    if not np.array_equal(xs(AcquisitionPolicy("pi_ei_switching", switch_fraction=0.0)), xs(AcquisitionPolicy("pi"))):
        failures.append("switching(0) != PI")
    if not np.array_equal(xs(AcquisitionPolicy("pi_ei_switching", switch_fraction=1.0)), xs(AcquisitionPolicy("ei"))):
        failures.append("switching(1) != EI")

    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    record_acceptance(5, ok, f"{'all identities hold' if not failures else 'broken: ' + ', '.join(failures)}, {elapsed:.1f}s")
    assert ok


# -- 6 and 7 -----------------------------------------------------------------


@pytest.mark.slow
def test_criterion_6_desk_scale_pareto(desk):
    cfg, result, elapsed = desk
    assert result.ok, result.failed
    finals, non_dominated = {}, []
    for problem in DESK_PROBLEMS:
        row = summary_rows(cfg, problem)["mastering"]
        finals[problem] = float(row["final_gap_mean"])
        if row["dominated"] == "false":
            non_dominated.append(problem)
    ok_a = all(v >= 0.85 for v in finals.values())
    ok_b = len(non_dominated) >= 2
    detail = (
        "mean final GAP "
        + ", ".join(f"{p}={v:.3f}" for p, v in finals.items())
        + f" (need >= 0.85: {'ok' if ok_a else 'no'}); non-dominated on "
        + f"{len(non_dominated)}/3 ({', '.join(non_dominated) or 'none'}; need >= 2); bundle {elapsed:.0f}s"
    )
    record_acceptance(6, ok_a and ok_b, detail)
    assert ok_a and ok_b


@pytest.mark.slow
def test_criterion_7_trade_off_direction(desk):
    cfg, _, _ = desk
    parts, ok = [], True
    for problem in DESK_PROBLEMS:
        rows = summary_rows(cfg, problem)
        m = rows["mastering"]
        d_ok = float(m["d_l2_mean"]) < float(rows["pi_ei_switching"]["d_l2_mean"])
        g_ok = float(m["a_gap"]) > float(rows["cb_srinivas_t2"]["a_gap"])
        ok &= d_ok and g_ok
        parts.append(
            f"{problem}: D_L2 {float(m['d_l2_mean']):.4f} vs switching {float(rows['pi_ei_switching']['d_l2_mean']):.4f}"
            f" ({'<' if d_ok else 'not <'}), a_gap {float(m['a_gap']):.3f} vs Srinivas-T2 "
            f"{float(rows['cb_srinivas_t2']['a_gap']):.3f} ({'>' if g_ok else 'not >'})"
        )
    record_acceptance(7, ok, "; ".join(parts))
    assert ok


# -- 8 -----------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_8_determinism_and_replay(desk):
    cfg, _, _ = desk
    t0 = time.perf_counter()
    paths = sorted(Path(cfg.out).rglob("run_*.jsonl"))
    reports = [replay(p) for p in paths]
    audit_ok = all(r.status == "ok" for r in reports)
    worst = max(r.max_deviation for r in reports)
    # re-execute one randomly chosen run of every (problem, policy)
    pick = np.random.default_rng(8)
    sample = [
        trace_path(cfg.out, prob, pol.id, int(pick.integers(cfg.runs)))
        for prob in DESK_PROBLEMS
        for pol in cfg.policies
    ]
    identical = sum(reexecute(p).fingerprint() == read_trace(p).fingerprint() for p in sample)
    elapsed = time.perf_counter() - t0
    ok = audit_ok and identical == len(sample) and elapsed < 300
    record_acceptance(
        8, ok,
        f"replay audit {sum(r.ok for r in reports)}/{len(reports)} ok (max |dy| {worst:.1e}); "
        f"re-execution bit-identical {identical}/{len(sample)} sampled traces; {elapsed:.0f}s",
    )
    assert ok


# -- 9 -----------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_9_mastering_structure(desk):
    cfg, _, _ = desk
    t0 = time.perf_counter()
    policy = next(p for p in cfg.policies if p.kind == "mastering")
    violations = []
    n_explore = n_traces = 0
    for problem in DESK_PROBLEMS:
        for r in range(cfg.runs):
            trace = read_trace(trace_path(cfg.out, problem, policy.id, r))
            n_traces += 1
            eta = policy.eta_for(trace.d)
            X, y = trace.X, trace.y
            for idx, rec in enumerate(trace.records):
                if rec.phase == "init":
                    continue
                tag = f"{problem}/run {r}/iteration {rec.iteration}"
                if rec.used_sigma:
                    violations.append(f"{tag}: GP sigma used")
                if rec.phase == "refine":
                    if rec.kind != "exploit":
                        violations.append(f"{tag}: refine decision is {rec.kind}")
                    continue
                # recompute the crowding test from the points seen before this decision
                prev_X, prev_y = X[:idx], y[:idx]
                x_plus = prev_X[int(np.argmin(prev_y))]
                count = int(np.count_nonzero(in_neighborhood(prev_X, x_plus, policy.w)))
                inside = bool(in_neighborhood(rec.x_exploit, x_plus, policy.w)[0])
                crowded = inside and count >= eta
                if count != rec.neighborhood_count:
                    violations.append(f"{tag}: recorded count {rec.neighborhood_count} != {count}")
                if rec.kind == "explore":
                    n_explore += 1
                    if not crowded:
                        violations.append(f"{tag}: explore without crowding")
                elif rec.kind == "exploit":
                    if crowded:
                        violations.append(f"{tag}: crowded but exploited")
                else:
                    violations.append(f"{tag}: unexpected kind {rec.kind}")
    elapsed = time.perf_counter() - t0
    ok = not violations and elapsed < 60
    record_acceptance(
        9, ok,
        f"{n_traces} mastering traces, {n_explore} explorative decisions, "
        f"{len(violations)} violations{': ' + violations[0] if violations else ''}; {elapsed:.1f}s",
    )
    assert ok
