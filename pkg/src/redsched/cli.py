"""Command-line experiment runner.

Subcommands: ``simulate``, ``sweep``, ``verify``, ``speedup-table``.
Exit codes: 0 success, 1 tool error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import itertools
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import tomli

from . import analysis, metrics
from .schedulers import Policy
from .service_model import (ServiceModelParams, build_speedup_table,
                            verify_speedup_properties)
from .sim_engine import SimConfig, dump_trace, run_simulation
from .workload import WorkloadParams, generate_jobs, load_trace

EXIT_OK, EXIT_ERROR, EXIT_VERIFY = 0, 1, 2
DESK_HORIZON = 20000.0
LONG_HORIZON = 100000.0
SWEEPABLE = ("arrival_rate", "beta", "policy", "speed_augmentation", "seed")


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


def derive_seed(master: int, replication: int) -> int:
    """Cantor pairing of (master, replication); injective on non-negative ints.
    Machine ids are mixed in downstream as a further SeedSequence key."""
    s = master + replication
    return s * (s + 1) // 2 + replication


@dataclass
class ExperimentSpec:
    sim_config: dict = field(default_factory=dict)
    workload_params: dict = field(default_factory=dict)
    replications: int = 1
    sweep: dict = field(default_factory=dict)
    output_dir: str = "results"
    trace_file: Optional[str] = None
    write_trace: bool = False
    thresholds: list = field(default_factory=lambda: list(metrics.DEFAULT_THRESHOLDS))


SIM_KEYS = {"M", "horizon", "policy", "beta", "slot_length", "speed_augmentation", "seed",
            "mid_slot_reassign", "service_params"}
WORKLOAD_KEYS = {"arrival_rate", "pareto_scale", "pareto_shape", "horizon"}
TOP_KEYS = {f.name for f in dataclasses.fields(ExperimentSpec)}


def _check_keys(section: str, d: dict, allowed: set) -> None:
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{section}.{k}: unknown field (allowed: {sorted(allowed)})")


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def spec_from_dict(d: dict) -> ExperimentSpec:
    _check_keys("config", d, TOP_KEYS)
    spec = ExperimentSpec(**{k: v for k, v in d.items()})
    _check_keys("sim_config", spec.sim_config, SIM_KEYS)
    _check_keys("workload_params", spec.workload_params, WORKLOAD_KEYS)
    _check_keys("sweep", spec.sweep, set(SWEEPABLE))
    if not isinstance(spec.replications, int) or spec.replications < 1:
        raise ConfigError("replications: must be a positive integer")
    for k, v in spec.sweep.items():
        if not isinstance(v, list) or not v:
            raise ConfigError(f"sweep.{k}: must be a nonempty list")
    return spec


def apply_overrides(spec: ExperimentSpec, args: argparse.Namespace) -> ExperimentSpec:
    sc, wp = spec.sim_config, spec.workload_params
    if getattr(args, "paper_scale", False):
        sc["horizon"] = LONG_HORIZON
    for flag, target, key in [("seed", sc, "seed"), ("policy", sc, "policy"), ("beta", sc, "beta"),
                              ("speed", sc, "speed_augmentation"), ("machines", sc, "M"),
                              ("horizon", sc, "horizon"), ("lam", wp, "arrival_rate")]:
        v = getattr(args, flag, None)
        if v is not None:
            target[key] = v
    if getattr(args, "replications", None) is not None:
        spec.replications = args.replications
    if getattr(args, "out", None) is not None:
        spec.output_dir = args.out
    if getattr(args, "trace", None) is not None:
        spec.trace_file = args.trace
    if getattr(args, "write_trace", False):
        spec.write_trace = True
    for item in getattr(args, "sweep", None) or []:
        key, _, values = item.partition("=")
        if key not in SWEEPABLE or not values:
            raise ConfigError(f"--sweep {item!r}: expected KEY=V1,V2 with KEY in {SWEEPABLE}")
        parse = str if key == "policy" else (int if key == "seed" else float)
        try:
            spec.sweep[key] = [parse(v) for v in values.split(",")]
        except ValueError as exc:
            raise ConfigError(f"sweep.{key}: {exc}") from None
    return spec


def build_configs(spec: ExperimentSpec, point: dict) -> tuple[SimConfig, Optional[WorkloadParams]]:
    sc = {"M": 100, "horizon": DESK_HORIZON, "policy": "SRPT_R", "seed": 0}
    sc.update(spec.sim_config)
    wp = dict(spec.workload_params)
    for k, v in point.items():
        (wp if k == "arrival_rate" else sc)[k] = v
    if sc.get("beta") is not None and not Policy.parse(str(sc["policy"])).needs_beta:
        sc["beta"] = None
    svc = sc.pop("service_params", None)
    try:
        if isinstance(svc, str):
            sc["service_params"] = {"apup": ServiceModelParams.apup_default,
                                    "unit": ServiceModelParams.unit_rate}[svc]()
        elif isinstance(svc, dict):
            sc["service_params"] = ServiceModelParams.from_dict(svc)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"sim_config.service_params: {exc}") from None
    try:
        cfg = SimConfig(**sc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sim_config: {exc}") from None
    if spec.trace_file:
        return cfg, None
    wp.setdefault("horizon", cfg.horizon)
    if "arrival_rate" not in wp:
        raise ConfigError("workload_params.arrival_rate: required (or pass --lambda)")
    try:
        return cfg, WorkloadParams(**wp)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"workload_params: {exc}") from None


def run_name(cfg: SimConfig, wp: Optional[WorkloadParams]) -> str:
    parts = [cfg.policy.value, f"{wp.arrival_rate:g}" if wp else "trace"]
    if cfg.beta is not None:
        parts.append(f"{cfg.beta:g}")
    if cfg.speed_augmentation != 1:
        parts.append(f"s{cfg.speed_augmentation:g}")
    parts.append(str(cfg.seed))
    return "_".join(parts)


def run_one(spec: ExperimentSpec, cfg: SimConfig, wp: Optional[WorkloadParams], out: Path) -> dict:
    jobs = load_trace(spec.trace_file) if spec.trace_file else generate_jobs(wp, cfg.seed, cfg.slot_length)
    cfg = dataclasses.replace(cfg, record_segments=spec.write_trace)
    start = time.perf_counter()
    trace = run_simulation(cfg, jobs)
    elapsed = time.perf_counter() - start
    m = metrics.summarize(trace, spec.thresholds)
    slope, _ = metrics.linear_trend(trace.n_series, cfg.slot_length)
    name = run_name(cfg, wp)
    extra = {"config": cfg.to_dict(), "workload": dataclasses.asdict(wp) if wp else {"trace": spec.trace_file},
             "active_count_slope": slope, "mean_active": float(trace.n_series.mean()) if len(trace.n_series) else 0.0}
    files = metrics.write_metrics(m, out / name, extra)
    if spec.write_trace:
        dump_trace(trace, out / f"{name}.trace.jsonl")
        files.append(str(out / f"{name}.trace.jsonl"))
    frac = m.fraction_within(40.0)
    print(f"{name}: jobs={m.total_jobs} avg_flowtime={m.average_flowtime:.4f} "
          f"within40={frac:.4f} censored={m.censored_count} ({elapsed:.1f}s)")
    return {"name": name, "seed": cfg.seed, "policy": cfg.policy.value,
            "arrival_rate": wp.arrival_rate if wp else None, "beta": cfg.beta,
            "speed_augmentation": cfg.speed_augmentation, "average_flowtime": m.average_flowtime,
            "fraction_within_40": frac, "censored": m.censored_count, "total_jobs": m.total_jobs,
            "files": [Path(f).name for f in files]}


def _points(spec: ExperimentSpec) -> list[dict]:
    keys = [k for k in SWEEPABLE if k in spec.sweep and k != "seed"]
    combos = itertools.product(*[spec.sweep[k] for k in keys])
    return [dict(zip(keys, c)) for c in combos]


def _seeds(spec: ExperimentSpec) -> list[int]:
    if "seed" in spec.sweep:
        masters = [int(s) for s in spec.sweep["seed"]]
    else:
        masters = [int(spec.sim_config.get("seed", 0))]
    return [derive_seed(m, i) for m in masters for i in range(spec.replications)]


def execute(spec: ExperimentSpec, sweep: bool) -> int:
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    points = _points(spec) if sweep else [{}]
    runs = []
    for point in points:
        for seed in _seeds(spec):
            cfg, wp = build_configs(spec, {**point, "seed": seed})
            runs.append(run_one(spec, cfg, wp, out))
    groups: dict[str, list[dict]] = {}
    for r in runs:
        key = json.dumps({k: r[k] for k in ("policy", "arrival_rate", "beta", "speed_augmentation")}, sort_keys=True)
        groups.setdefault(key, []).append(r)
    summary = []
    for key, rs in groups.items():
        avgs = [r["average_flowtime"] for r in rs]
        summary.append({**json.loads(key), "per_seed_average": {str(r["seed"]): r["average_flowtime"] for r in rs},
                        "mean_average_flowtime": sum(avgs) / len(avgs)})
    doc = {"sweep": spec.sweep if sweep else {}, "replications": spec.replications,
           "runs": runs, "summary": summary}
    target = out / ("manifest.json" if sweep else "summary.json")
    with open(target, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    for s in summary:
        print(f"summary {s['policy']} lambda={s['arrival_rate']} beta={s['beta']}: "
              f"mean avg flowtime {s['mean_average_flowtime']:.4f} over {len(s['per_seed_average'])} runs")
    return EXIT_OK


def _corrupt_first(alpha: dict) -> dict:
    alpha = dict(alpha)
    first = min(alpha)
    alpha[first] += 10.0
    return alpha


def cmd_verify(args) -> int:
    seed = args.seed
    n = args.instances
    kw = {} if seed is None else {"seed": seed}
    suite = args.suite
    if suite == "eq14":
        report = analysis.eq14_suite()
    elif suite == "srpt-dual":
        report = analysis.srpt_dual_suite(n or 100, corrupt=_corrupt_first if args.corrupt_alpha else None, **kw)
    elif suite == "fair-dual":
        report = analysis.fair_dual_suite(n or 100, **kw)
    elif suite == "potential":
        report = analysis.potential_suite(n or 50, **kw)
    elif suite == "p1-bound":
        report = analysis.p1_suite(n or 100, **kw)
    elif suite == "speedup":
        params = ServiceModelParams.unit_rate() if args.model == "unit" else ServiceModelParams.apup_default()
        report = analysis.speedup_suite(params, replications=args.replications or 10_000, **kw)
    else:
        raise ConfigError(f"unknown suite {suite!r}")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"verify_{suite}.json"
    path.write_text(report.to_json() + "\n", encoding="utf-8")
    bad = report.failures()
    print(f"{suite}: {len(report.checks)} checks, {len(bad)} failed -> {path}")
    for c in bad[:20]:
        print(f"  FAIL {c.name}: worst slack {c.worst_slack:.6g} at job={c.job} t={c.time} {c.detail}")
    return EXIT_OK if not bad else EXIT_VERIFY


def cmd_speedup_table(args) -> int:
    params = ServiceModelParams.unit_rate() if args.model == "unit" else ServiceModelParams.apup_default()
    rs = range(1, args.max_r + 1)
    ts = [float(t) for t in args.times.split(",")]
    table = build_speedup_table(params, rs, ts, args.replications or 10_000, args.seed or 0)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "speedup_table.csv"
    table.to_csv(path)
    rep = verify_speedup_properties(table)
    print(f"speedup table with {len(table.entries)} entries -> {path}; peak rate {table.peak_rate_delta:.4f}")
    for c in rep.failures():
        print(f"  FAIL {c.name} r={c.r} t={c.t:g} slack={c.slack:.4g}")
    return EXIT_OK if rep.passed else EXIT_VERIFY


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML experiment file")
    p.add_argument("--seed", type=int)
    p.add_argument("--policy")
    p.add_argument("--lambda", dest="lam", type=float, help="arrival rate")
    p.add_argument("--beta", type=float)
    p.add_argument("--speed", type=float, help="speed augmentation factor")
    p.add_argument("--machines", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--replications", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--paper-scale", action="store_true", help=f"horizon {LONG_HORIZON:g} slots")
    p.add_argument("--trace", help="job trace CSV (job_id,arrival,size) instead of a generated workload")
    p.add_argument("--write-trace", action="store_true", help="also dump the full JSONL trace")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="redsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one configuration")
    _add_run_flags(p)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    _add_run_flags(p)
    p.add_argument("--sweep", action="append", metavar="KEY=V1,V2",
                   help=f"sweep values; KEY in {', '.join(SWEEPABLE)}")

    p = sub.add_parser("verify", help="run an analysis check suite")
    p.add_argument("suite", choices=["speedup", "srpt-dual", "fair-dual", "potential", "p1-bound", "eq14"])
    p.add_argument("--seed", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--model", choices=["apup", "unit"], default="apup")
    p.add_argument("--corrupt-alpha", action="store_true", help="plant an alpha += 10 violation")
    p.add_argument("--out")

    p = sub.add_parser("speedup-table", help="Monte Carlo estimates of the redundancy speedup")
    p.add_argument("--max-r", type=int, default=8)
    p.add_argument("--times", default="1,5,10,50")
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", choices=["apup", "unit"], default="apup")
    p.add_argument("--out")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("simulate", "sweep"):
            spec = spec_from_dict(load_config(args.config)) if args.config else ExperimentSpec()
            spec = apply_overrides(spec, args)
            return execute(spec, sweep=args.command == "sweep")
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_speedup_table(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
