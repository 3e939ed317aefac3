"""Command line entry point: ``bomaster {run,metrics,plots,replay,list,init-config}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..acquisition import KINDS, AcquisitionPolicy
from ..errors import ConfigError
from ..testbed import manifest
from . import config as config_mod
from .plots import emit_plots
from .replay import reexecute, replay
from .runner import load_manifest_config, run_experiment, summarize

log = logging.getLogger("bomaster")


def _add_common(p):
    p.add_argument("--config", type=Path, help="YAML experiment configuration")
    p.add_argument("--seed", type=int, dest="master_seed", help="master seed (unsigned 64-bit)")
    p.add_argument("--runs", type=int, help="runs per (problem, policy)")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--out", type=str, help="output directory")
    p.add_argument("--profile", choices=sorted(config_mod.PROFILES), help="run-count profile")


def _config(args) -> config_mod.ExperimentConfig:
    overrides = {
        k: getattr(args, k, None) for k in ("master_seed", "runs", "workers", "out", "profile")
    }
    if args.config:
        return config_mod.load(args.config, **overrides)
    if args.out and (Path(args.out) / "manifest.json").exists() and args.command != "run":
        return load_manifest_config(args.out)
    return config_mod.from_dict({}, **overrides)


def cmd_run(args) -> int:
    cfg = _config(args)
    result = run_experiment(cfg)
    print(f"{len(result.traces)} traces in {result.out} ({result.skipped} reused)")
    print(f"Pareto table: {result.out / 'table1.csv'}")
    for line in result.failed:
        print(f"FAILED {line}", file=sys.stderr)
    return 0 if result.ok else 1


def cmd_metrics(args) -> int:
    cfg = _config(args)
    summarize(cfg)
    print((Path(cfg.out) / "table1.csv").read_text(), end="")
    return 0


def cmd_plots(args) -> int:
    cfg = _config(args)
    try:
        paths = emit_plots(cfg, render=not args.no_render)
    except FileNotFoundError as exc:
        print(f"incomplete bundle: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


def cmd_replay(args) -> int:
    status = 0
    for path in args.traces:
        report = replay(path)
        line = f"{path}: {report.status}"
        if report.max_deviation is not None:
            line += f" (max |dy| = {report.max_deviation:.3g} over {report.iterations} points)"
        if report.message:
            line += f" - {report.message}"
        if args.reexecute and report.ok:
            from ..engine import read_trace

            same = reexecute(path).fingerprint() == read_trace(path).fingerprint()
            line += "; re-execution identical" if same else "; re-execution DIFFERS"
            status |= 0 if same else 1
        print(line)
        if report.status == "integrity failure":
            status = 1
        elif report.status == "noisy run":
            status = status or 2
    return status


def cmd_list(args) -> int:
    if args.json:
        print(json.dumps({"problems": manifest(), "policies": list(KINDS)}, indent=2))
        return 0
    print("problems:")
    for p in manifest():
        print(f"  {p['name']:<11} d={p['d']}  y*={p['y_star']:.6g}  "
              f"box=[{', '.join(f'{a:g}..{b:g}' for a, b in zip(p['lower'], p['upper']))}]")
    print("policies:")
    for kind in KINDS:
        params = {k: v for k, v in AcquisitionPolicy(kind).describe().items() if k not in ("kind", "id")}
        extra = " ".join(f"{k}={v}" for k, v in params.items())
        print(f"  {kind:<18} {extra}")
    return 0


def cmd_init_config(args) -> int:
    path = Path(args.path)
    if path.exists() and not args.force:
        print(f"{path} exists (use --force)", file=sys.stderr)
        return 1
    path.write_text(config_mod.CONFIG_TEMPLATE)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bomaster", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute an experiment (resumes if partially done)")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="recompute summaries and the Pareto table from traces")
    _add_common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("plots", help="write plot data and figures")
    _add_common(p)
    p.add_argument("--no-render", action="store_true", help="CSV only, no PNG")
    p.set_defaults(func=cmd_plots)

    p = sub.add_parser("replay", help="audit trace files against the objective")
    p.add_argument("traces", nargs="+", type=Path)
    p.add_argument("--reexecute", action="store_true", help="also rerun from the recorded seed")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("list", help="show test problems and policy kinds")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("init-config", help="write a commented configuration file")
    p.add_argument("path", nargs="?", default="experiment.yaml")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
