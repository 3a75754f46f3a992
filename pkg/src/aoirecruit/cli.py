"""Command-line harness.

Subcommands: solve, classify, bounds, evaluate, simulate, sweep, bench.
Exit codes: 0 ok, 1 error, 2 finished with a warning (truncation or
non-convergence).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evaluate import (
    brute_force_optimal,
    dynamic_pricing_surrogate,
    exact_average_cost,
    zero_wait_cost_closed_form,
)
from .io import ConfigError, check_schema, load_json
from .model import (
    SCENARIO_SCHEMA,
    Action,
    PolicyStructure,
    ScenarioError,
    ThresholdPolicy,
    classify_structure,
    cost_effectiveness,
    scenario_from_dict,
    structure_is_boundary,
    success_prob,
    threshold_bounds,
    zero_wait_policy,
)
from .sim import SimConfig, simulate
from .solver import ENGINES, SOLVER_CONFIG_SCHEMA, SolverConfig, default_m, solve

logger = logging.getLogger("aoirecruit")

EXIT_OK, EXIT_ERROR, EXIT_WARNING = 0, 1, 2
SWEEP_TARGETS = ("beta", "p_L", "p_H", "c_L", "c_H", "r_L", "r_H")
NAMED_POLICIES = ("zero_wait", "dp_surrogate", "optimal", "brute_force")

POLICY_SCHEMA = {
    "oneOf": [
        {"enum": list(NAMED_POLICIES)},
        {
            "type": "object",
            "properties": {
                "structure": {"enum": [p.value for p in PolicyStructure]},
                "thresholds": {
                    "type": "object",
                    "properties": {k: {"type": "integer", "minimum": 1} for k in ("L", "H", "B")},
                    "additionalProperties": False,
                },
            },
            "required": ["thresholds"],
            "additionalProperties": False,
        },
    ]
}

SOLVE_SCHEMA = {
    "type": "object",
    "properties": {"scenario": SCENARIO_SCHEMA, "solver": SOLVER_CONFIG_SCHEMA},
    "required": ["scenario"],
    "additionalProperties": False,
}

EVALUATE_SCHEMA = {
    "type": "object",
    "properties": {"scenario": SCENARIO_SCHEMA, "policy": POLICY_SCHEMA, "solver": SOLVER_CONFIG_SCHEMA},
    "required": ["scenario", "policy"],
    "additionalProperties": False,
}

SIMULATE_SCHEMA = {
    "type": "object",
    "properties": {
        "scenario": SCENARIO_SCHEMA,
        "policy": POLICY_SCHEMA,
        "solve_first": {"type": "boolean"},
        "solver": SOLVER_CONFIG_SCHEMA,
        "sim": {
            "type": "object",
            "properties": {
                "horizon": {"type": "integer"},
                "seed": {"type": "integer", "minimum": 0},
                "record_histogram": {"type": "boolean"},
            },
            "required": ["horizon"],
            "additionalProperties": False,
        },
    },
    "required": ["scenario", "sim"],
    "additionalProperties": False,
}

SWEEP_SCHEMA = {
    "type": "object",
    "properties": {
        "target": {"enum": list(SWEEP_TARGETS)},
        "grid": {
            "oneOf": [
                {"type": "array", "items": {"type": "number"}, "minItems": 1},
                {
                    "type": "object",
                    "properties": {
                        "start": {"type": "number"},
                        "stop": {"type": "number"},
                        "step": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "required": ["start", "stop", "step"],
                    "additionalProperties": False,
                },
            ]
        },
        "scenario": SCENARIO_SCHEMA,
        "solver": SOLVER_CONFIG_SCHEMA,
        "baselines": {"type": "boolean"},
        "workers": {"type": "integer", "minimum": 1},
    },
    "required": ["target", "scenario"],
    "additionalProperties": False,
}

BENCH_SCHEMA = {
    "type": "object",
    "properties": {
        "scenario": SCENARIO_SCHEMA,
        "betas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "m": {"type": "integer", "minimum": 2},
        "theta": {"type": "number", "exclusiveMinimum": 0},
        "max_iters": {"type": "integer", "minimum": 1},
        "engines": {"type": "array", "items": {"enum": list(ENGINES)}, "minItems": 1, "uniqueItems": True},
    },
    "required": ["scenario", "betas"],
    "additionalProperties": False,
}


def _load(path, schema) -> dict:
    data = load_json(path)
    check_schema(data, schema)
    return data


def _solver_config(data: dict | None, s) -> SolverConfig:
    data = dict(data or {})
    data.setdefault("m", default_m(s))
    return SolverConfig(**data)


def _emit(obj, out=None) -> None:
    text = json.dumps(obj, indent=2)
    if out is not None:
        Path(out).write_text(text + "\n")
    print(text)


def _policy(spec, s, solver_data=None) -> ThresholdPolicy:
    if spec == "zero_wait":
        return zero_wait_policy(s)
    if spec == "dp_surrogate":
        return dynamic_pricing_surrogate(s)
    if spec == "optimal":
        return solve(s, _solver_config(solver_data, s)).thresholds
    if spec == "brute_force":
        return brute_force_optimal(s)[0]
    structure = spec.get("structure") or classify_structure(s).value
    return ThresholdPolicy(PolicyStructure(structure), spec["thresholds"])


# --- subcommands -----------------------------------------------------------

def cmd_solve(args) -> int:
    data = _load(args.config, SOLVE_SCHEMA)
    s = scenario_from_dict(data["scenario"])
    cfg = _solver_config(data.get("solver"), s)
    result = solve(s, cfg)
    _emit(result.to_dict(), args.out)
    if result.truncation_warning:
        logger.warning("truncation warning: m=%d <= B-threshold bound %d", cfg.m, result.bounds.last)
        return EXIT_WARNING
    if not result.converged:
        logger.warning("not converged within %d sweeps", cfg.max_iters)
        return EXIT_WARNING
    return EXIT_OK


def _scenario_arg(path):
    data = load_json(path)
    if isinstance(data, dict) and "scenario" in data:
        data = data["scenario"]
    return scenario_from_dict(data)


def cmd_classify(args) -> int:
    s = _scenario_arg(args.config)
    structure = classify_structure(s)
    _emit({
        "structure": structure.value,
        "order": [a.name for a in structure.order],
        "boundary": structure_is_boundary(s),
        "Q": {a.name: success_prob(s, a) for a in Action},
        "eta": {a.name: cost_effectiveness(s, a) for a in (Action.L, Action.H, Action.B)},
    }, args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    s = _scenario_arg(args.config)
    b = threshold_bounds(s)
    _emit({"structure": b.structure.value, "bounds": b.to_dict()}, args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    data = _load(args.config, EVALUATE_SCHEMA)
    s = scenario_from_dict(data["scenario"])
    spec = data["policy"]
    if spec == "brute_force":
        policy, _ = brute_force_optimal(s, table_path=args.audit_csv)
    else:
        policy = _policy(spec, s, data.get("solver"))
    report = exact_average_cost(s, policy).to_dict()
    report["policy"] = policy.to_dict()
    _emit(report, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    data = _load(args.config, SIMULATE_SCHEMA)
    s = scenario_from_dict(data["scenario"])
    sim = dict(data["sim"])
    if args.seed is not None:
        sim["seed"] = args.seed
    cfg = SimConfig(**sim)
    if data.get("solve_first"):
        policy = solve(s, _solver_config(data.get("solver"), s)).thresholds
    elif "policy" in data:
        policy = _policy(data["policy"], s, data.get("solver"))
    else:
        raise ConfigError("simulate needs either 'policy' or 'solve_first': true")
    stats = simulate(s, policy, cfg, trajectory=args.trajectory)
    out = stats.to_dict()
    out["policy"] = policy.to_dict()
    if args.check:
        exact = exact_average_cost(s, policy).avg_cost
        out["exact_avg_cost"] = exact
        out["relative_gap"] = abs(stats.empirical_avg_cost - exact) / exact
    _emit(out, args.out)
    return EXIT_OK


@dataclass
class SweepSpec:
    target: str
    grid: list[float]
    base: dict
    solver: dict = field(default_factory=dict)
    baselines: bool = False
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        check_schema(data, SWEEP_SCHEMA)
        grid = data.get("grid", default_grid(data["target"]))
        if isinstance(grid, dict):
            grid = expand_grid(grid["start"], grid["stop"], grid["step"])
        base = scenario_from_dict(data["scenario"]).as_flat()
        return cls(data["target"], [float(x) for x in grid], base, data.get("solver", {}),
                   data.get("baselines", False), data.get("workers", 1))


def expand_grid(start: float, stop: float, step: float) -> list[float]:
    n = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 10) for i in range(n + 1)]


def default_grid(target: str) -> list[float]:
    if target in ("p_L", "p_H"):
        return expand_grid(0.1, 0.9, 0.05)
    if target == "beta":
        return [1e-4, 1e-3, 1e-2, 1e-1]
    return expand_grid(1.0, 4.0, 0.1)


SWEEP_COLUMNS = ["param", "value", "structure", "boundary", "delta_L", "delta_H", "delta_B",
                 "avg_cost", "bound_L", "bound_H", "bound_B", "converged", "truncation_warning"]


def _sweep_point(target, value, base, solver_data, baselines):
    flat = dict(base)
    flat[target] = value
    from .model import validate_scenario

    s = validate_scenario(**flat)
    res = solve(s, _solver_config(solver_data, s))
    th = res.thresholds.thresholds
    bd = res.bounds.bounds
    row = {
        "param": target, "value": repr(value), "structure": res.structure.value,
        "boundary": int(res.boundary),
        "delta_L": th.get(Action.L, ""), "delta_H": th.get(Action.H, ""), "delta_B": th.get(Action.B, ""),
        "avg_cost": repr(res.avg_cost),
        "bound_L": bd.get(Action.L, ""), "bound_H": bd.get(Action.H, ""), "bound_B": bd.get(Action.B, ""),
        "converged": int(res.converged), "truncation_warning": int(res.truncation_warning),
    }
    if baselines:
        zw = exact_average_cost(s, zero_wait_policy(s)).avg_cost
        dp = exact_average_cost(s, dynamic_pricing_surrogate(s)).avg_cost
        row["zero_wait_cost"] = repr(zw)
        row["dp_surrogate_cost"] = repr(dp)
    return row


def _sweep_task(task):
    i, target, value, base, solver_data, baselines = task
    try:
        return i, _sweep_point(target, value, base, solver_data, baselines), None
    except (ScenarioError, ValueError) as exc:
        return i, None, f"{i} {target}={value!r}: {exc}"


def run_sweep(spec: SweepSpec, out_csv) -> list[dict]:
    tasks = [(i, spec.target, v, spec.base, spec.solver, spec.baselines) for i, v in enumerate(spec.grid)]
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    columns = SWEEP_COLUMNS + (["zero_wait_cost", "dp_surrogate_cost"] if spec.baselines else [])
    rows, errors = [], []
    for _, row, err in sorted(results, key=lambda r: r[0]):
        if err is not None:
            logger.warning("skipped grid point %s", err)
            errors.append(err)
        else:
            rows.append(row)
    with Path(out_csv).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        w.writerows(rows)
    Path(str(out_csv) + ".errors.log").write_text("".join(e + "\n" for e in errors))
    return rows


def cmd_sweep(args) -> int:
    if args.out is None:
        raise ConfigError("sweep needs --out <csv>")
    spec = SweepSpec.from_dict(load_json(args.config))
    rows = run_sweep(spec, args.out)
    print(json.dumps({"rows": len(rows), "skipped": len(spec.grid) - len(rows), "out": str(args.out)}))
    return EXIT_OK


class EngineMismatchError(RuntimeError):
    pass


def run_bench(data: dict, timings: bool = False) -> dict:
    """Solve the scenario at each beta with every engine and compare work counters."""
    check_schema(data, BENCH_SCHEMA)
    base = scenario_from_dict(data["scenario"])
    engines = data.get("engines", list(ENGINES))
    rows = []
    for beta in data["betas"]:
        s = base.replace(beta=beta)
        m = data.get("m", default_m(s))
        row = {"beta": beta}
        ref = None
        for engine in engines:
            cfg = SolverConfig(m=m, theta=data.get("theta", 1e-10), engine=engine,
                               max_iters=data.get("max_iters", 1_000_000))
            t0 = time.perf_counter()
            res = solve(s, cfg)
            row[f"{engine}_wall_time_s"] = time.perf_counter() - t0
            row[f"{engine}_iterations"] = res.iterations
            row[f"{engine}_argmin_evals"] = res.argmin_evals
            row[f"{engine}_avg_cost"] = res.avg_cost
            if ref is None:
                ref = res
            elif not np.array_equal(ref.policy, res.policy):
                d = int(np.flatnonzero(ref.policy != res.policy)[0]) + 1
                raise EngineMismatchError(
                    f"beta={beta}: {engine} differs from {ref.engine} first at state {d} "
                    f"({Action(int(res.policy[d - 1])).name} vs {Action(int(ref.policy[d - 1])).name})"
                )
        row["policy_equal"] = True
        if "brvi" in engines:
            for other in ("rvi", "structural_rvi"):
                if other in engines:
                    row[f"brvi_vs_{other}_reduction"] = 1.0 - row["brvi_argmin_evals"] / row[f"{other}_argmin_evals"]
        rows.append(row)
    return {"engines": engines, "rows": rows}


def cmd_bench(args) -> int:
    report = run_bench(load_json(args.config))
    if args.out is not None:
        keys = [k for k in report["rows"][0] if args.timings or not k.endswith("wall_time_s")]
        with Path(args.out).open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore")
            w.writeheader()
            for row in report["rows"]:
                w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    print(json.dumps(report, indent=2))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "classify": cmd_classify,
    "bounds": cmd_bounds,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoirecruit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--out", help="output file (JSON, or CSV for sweep/bench)")
        p.add_argument("--seed", type=int, help="override the simulation seed")
        p.add_argument("--check", action="store_true", help="compare simulation against exact evaluation")
        if name == "simulate":
            p.add_argument("--trajectory", help="write a per-slot CSV trajectory here")
        if name == "evaluate":
            p.add_argument("--audit-csv", help="with policy 'brute_force', write every candidate here")
        if name == "bench":
            p.add_argument("--timings", action="store_true", help="include wall-clock columns in the CSV")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ScenarioError, ValueError, EngineMismatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
