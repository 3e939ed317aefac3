"""Experiment configuration (YAML on disk, dataclasses in memory)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..acquisition import AcquisitionPolicy, default_policies
from ..errors import ConfigError
from ..inner_opt import InnerConfig
from ..testbed import get_problem, problem_names

PROFILES = {
    # runs per (problem, policy); everything else is shared
    "desk": {"runs": 10},
    "paper": {"runs": 100},
}

DEFAULT_SEED = 20230515

# Written by ``bomaster init-config``; every key is optional.
CONFIG_TEMPLATE = """\
# bomaster experiment configuration. CLI flags override these keys.

# desk: 10 runs per (problem, policy); paper: 100 runs
profile: desk
# runs: 10              # overrides the profile
master_seed: 20230515   # run r of problem p is seeded with hash(master_seed, p, r)
workers: 1              # parallel worker processes
out: results            # output directory

# names from `bomaster list`; optional per-problem d (Rosenbrock, Schwefel,
# StybTang only) and observation noise sd
problems:
  - Branin
  - Schwefel
  - StybTang
  # - {name: Rosenbrock, d: 3, noise_sd: 0.0}

# kinds from `bomaster list`; a mapping may set `name` and any parameter
policies:
  - cb_const            # beta: 1.0
  - cb_srinivas_t1      # delta: 0.1, grid_size: 100**d
  - cb_srinivas_t2      # delta: 0.1, r: 1, a: 1, b: 1
  - cb_randomised       # theta: 1.0
  - eps_rs              # epsilon: 0.1
  - eps_pf              # epsilon: 0.1
  - pi
  - ei
  - pi_ei_alternating   # alternate_start: pi
  - pi_ei_switching     # switch_fraction: 0.5
  - mastering           # w: 0.1, eta: 5*d
  # - {kind: cb_const, name: cb_beta4, beta: 4.0}

# budgets as multiples of the problem dimension d
budget:
  n0_mult: 5            # initial LHS design
  N_mult: 20            # total evaluations
  N1_mult: 15           # mastering: main phase ends here
  N2_mult: 5            # mastering: exploit-only refining

inner:
  n_candidates: null    # null -> 100*d LHS candidates
  n_refine: 5           # best candidates polished with L-BFGS-B
  max_local_steps: 50
  tolerance: 1.0e-6

gp:
  noise_variance: null  # null -> fitted within [1e-8, 1e-1]; a number pins it
"""


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    d: int | None = None
    noise_sd: float = 0.0

    def build(self):
        return get_problem(self.name, d=self.d, noise_sd=self.noise_sd)


@dataclass(frozen=True)
class Budget:
    n0_mult: int = 5
    N_mult: int = 20
    N1_mult: int = 15
    N2_mult: int = 5

    def for_dim(self, d: int) -> tuple[int, int, int, int]:
        return self.n0_mult * d, self.N_mult * d, self.N1_mult * d, self.N2_mult * d


@dataclass(frozen=True)
class ExperimentConfig:
    problems: tuple[ProblemSpec, ...]
    policies: tuple[AcquisitionPolicy, ...]
    runs: int = 10
    master_seed: int = DEFAULT_SEED
    budget: Budget = field(default_factory=Budget)
    inner: InnerConfig = field(default_factory=InnerConfig)
    gp_noise: float | None = None
    out: str = "results"
    workers: int = 1
    profile: str = "desk"

    def __post_init__(self):
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if not self.problems:
            raise ConfigError("no problems configured")
        if not self.policies:
            raise ConfigError("no policies configured")
        ids = [p.id for p in self.policies]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate policy ids: {ids}")
        b = self.budget
        if any(p.kind == "mastering" for p in self.policies) and b.N1_mult + b.N2_mult != b.N_mult:
            raise ConfigError("N1_mult + N2_mult must equal N_mult when mastering is configured")
        if not 0 < b.n0_mult < b.N_mult:
            raise ConfigError("need 0 < n0_mult < N_mult")
        if any(p.kind == "mastering" for p in self.policies) and b.N1_mult <= b.n0_mult:
            raise ConfigError("N1_mult must exceed n0_mult")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "runs": self.runs,
            "master_seed": self.master_seed,
            "workers": self.workers,
            "out": self.out,
            "problems": [asdict(p) for p in self.problems],
            "policies": [p.describe() for p in self.policies],
            "budget": asdict(self.budget),
            "inner": asdict(self.inner),
            "gp": {"noise_variance": self.gp_noise},
        }

    def experiment_hash(self) -> str:
        """Hash of everything that affects results (not workers or out dir)."""
        d = self.to_dict()
        for k in ("workers", "out", "profile"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _problem(entry) -> ProblemSpec:
    if isinstance(entry, str):
        entry = {"name": entry}
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"bad problem entry {entry!r}")
    extra = set(entry) - {"name", "d", "noise_sd"}
    if extra:
        raise ConfigError(f"unknown problem keys {sorted(extra)}")
    spec = ProblemSpec(entry["name"], entry.get("d"), float(entry.get("noise_sd", 0.0) or 0.0))
    if spec.name not in problem_names():
        raise ConfigError(f"unknown problem {spec.name!r}; known: {', '.join(problem_names())}")
    try:
        spec.build()
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return spec


def _policy(entry) -> AcquisitionPolicy:
    if isinstance(entry, str):
        entry = {"kind": entry}
    try:
        return AcquisitionPolicy.from_dict(entry)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad policy entry {entry!r}: {exc}") from exc


def from_dict(raw: dict | None, **overrides) -> ExperimentConfig:
    """Build a config from parsed YAML; ``overrides`` (non-None) win."""
    raw = dict(raw or {})
    raw.update({k: v for k, v in overrides.items() if v is not None})
    profile = raw.pop("profile", "desk")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; known: {', '.join(PROFILES)}")
    runs = raw.pop("runs", None)
    if runs is None:
        runs = PROFILES[profile]["runs"]

    problems = raw.pop("problems", None) or problem_names()
    policies = raw.pop("policies", None)
    policies = [_policy(p) for p in policies] if policies else default_policies()

    try:
        budget = Budget(**(raw.pop("budget", None) or {}))
        inner = InnerConfig(**(raw.pop("inner", None) or {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    gp_cfg = raw.pop("gp", None) or {}
    cfg = ExperimentConfig(
        problems=tuple(_problem(p) for p in problems),
        policies=tuple(policies),
        runs=int(runs),
        master_seed=int(raw.pop("master_seed", DEFAULT_SEED)),
        budget=budget,
        inner=inner,
        gp_noise=gp_cfg.get("noise_variance"),
        out=str(raw.pop("out", "results")),
        workers=int(raw.pop("workers", 1)),
        profile=profile,
    )
    if raw:
        raise ConfigError(f"unknown config keys: {sorted(raw)}")
    return cfg


def load(path, **overrides) -> ExperimentConfig:
    text = Path(path).read_text()
    return from_dict(yaml.safe_load(text), **overrides)
