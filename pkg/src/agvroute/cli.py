"""Command-line entry point: ``agvroute <command> ...``.

Results go to standard output (or ``-o``) as JSON, facts or CSV; a one-line
human summary goes to standard error.  Exit status 0 means success, 1 means
infeasible / deadlock / failed validation, 2 means bad input or usage.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import baseline, factio, genbench, oracle
from .model import ScenarioError, Scenario
from .optimizer import SolverConfig, solve
from .validation import InfeasibleSolution, validate

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def _scenario(path: str) -> Scenario:
    text = _read(path)
    if path.endswith(".json"):
        return factio.parse_scenario_json(text)
    return factio.parse_facts(text)


def _write(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc.strerror or exc}") from None


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _note(msg: str):
    print(msg, file=sys.stderr)


# ------------------------------------------------------------------ commands


def cmd_validate(args) -> int:
    s = _scenario(args.input)
    sol = factio.parse_solution(_read(args.solution), s)
    report = validate(s, sol)
    _write(_json(report.as_dict()), args.output)
    if report.feasible:
        _note(f"feasible: {tuple(report.objectives)}")
        return EXIT_OK
    _note("infeasible: " + ", ".join(c.kind for c in report.conflicts))
    return EXIT_FAIL


def _solver_config(args, prove_optimal=None) -> SolverConfig:
    return SolverConfig(
        budget_ms=args.budget_ms,
        workers=args.threads,
        prove_optimal=args.prove_optimal if prove_optimal is None else prove_optimal,
        seed=args.seed,
        stage_mode=args.stage_mode,
    )


def cmd_solve(args) -> int:
    s = _scenario(args.input)
    cfg = _solver_config(args)

    def progress(vec, elapsed, nodes):
        _note(f"incumbent {tuple(vec)} at {elapsed:.0f} ms, {nodes} nodes")

    out = solve(s, cfg, progress if args.progress else None)
    doc = factio.solution_document(out.solution, out.objectives, out.status)
    doc["stats"] = out.stats.as_dict()
    _write(_json(doc), args.output)
    obj = tuple(out.objectives) if out.objectives else "-"
    _note(f"{out.status}: {obj} ({out.stats.nodes_expanded} nodes, {out.stats.elapsed_ms:.0f} ms)")
    return EXIT_OK if out.solution is not None else EXIT_FAIL


def cmd_enumerate(args) -> int:
    s = _scenario(args.input)
    canon = oracle.Canonicalization(
        routes_end_at_last_completion=not args.continue_routes,
        idle_vehicles_empty_route=not args.idle_routes,
    )
    try:
        res = oracle.enumerate_feasible(s, canon, args.limit)
    except oracle.LimitReached as exc:
        doc = {"feasible_count": None, "limit_reached": exc.count, "canonicalization": canon.as_dict()}
        _write(_json(doc), args.output)
        _note(f"stopped after {exc.count} solutions")
        return EXIT_OK
    doc = res.as_dict()
    if args.witness and res.witness is not None:
        doc["witness"] = factio.solution_document(res.witness, res.optimum, "optimal")
    _write(_json(doc), args.output)
    if res.optimum is None:
        _note("no feasible solution")
        return EXIT_FAIL
    _note(f"{res.count} feasible, {res.optima_count} optimal at {tuple(res.optimum)}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    s = _scenario(args.input)
    res = baseline.greedy_round_robin(s)
    if isinstance(res, baseline.Failure):
        _write(_json(res.as_dict()), args.output)
        _note(f"{res.kind}: {res.detail}")
        return EXIT_FAIL
    report = validate(s, res)
    _write(factio.emit_solution(res, report.objectives, "feasible"), args.output)
    _note(f"feasible: {tuple(report.objectives) if report.objectives else '-'}")
    return EXIT_OK if report.feasible else EXIT_FAIL


_GEN_FLAGS = {f.name: f for f in fields(genbench.GenParams)}


def cmd_gen(args) -> int:
    base = {
        name: getattr(args, name)
        for name in _GEN_FLAGS
        if name not in ("seed",) and getattr(args, name, None) is not None
    }
    for name in ("move_duration", "halt_duration", "park_duration"):
        if name in base:
            base[name] = tuple(base[name])
    if args.count > 1 and args.dir is None:
        raise InputError("--count above 1 needs --dir")
    made = []
    for k in range(args.count):
        p = genbench.GenParams(seed=args.seed + k, **base)
        text = factio.emit_facts(genbench.generate(p))
        if args.dir is not None:
            Path(args.dir).mkdir(parents=True, exist_ok=True)
            path = Path(args.dir) / f"{args.prefix}{p.seed:04d}.lp"
            _write(text, str(path))
            made.append(str(path))
        else:
            _write(text, args.output)
    if made:
        _note(f"wrote {len(made)} instance(s) to {args.dir}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if not Path(args.dir).is_dir():
        raise InputError(f"--dir {args.dir} is not a directory")
    cfg = _solver_config(args, prove_optimal=True)  # bounded by --budget-ms only
    solvers = [x.strip() for x in args.solvers.split(",") if x.strip()]
    rows = genbench.run_bench(args.dir, cfg, solvers, workers=args.jobs)
    _write(genbench.rows_to_csv(rows), args.out)
    _note(f"{len(rows)} rows")
    return EXIT_OK


def cmd_convert(args) -> int:
    s = _scenario(args.input)
    target = args.to or ("lp" if args.input.endswith(".json") else "json")
    if target == "json":
        _write(_json(factio.scenario_document(s)), args.output)
    else:
        _write(factio.emit_facts(s), args.output)
    _note(f"converted {args.input} to {target}")
    return EXIT_OK


def cmd_emit_atoms(args) -> int:
    s = _scenario(args.input)
    sol = factio.parse_solution(_read(args.solution), s)
    try:
        text = factio.emit_atoms(s, sol)
    except InfeasibleSolution as exc:
        _note("infeasible: " + ", ".join(c.kind for c in exc.conflicts))
        return EXIT_FAIL
    _write(text, args.output)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _nonneg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _solver_flags(p: argparse.ArgumentParser, proof=True):
    p.add_argument("--budget-ms", type=_nonneg, default=None, help="wall-clock budget in milliseconds")
    p.add_argument("--threads", type=_positive, default=1, help="worker processes (1 is deterministic)")
    if proof:
        p.add_argument("--prove-optimal", action="store_true",
                       help="search until optimality is proven (otherwise: first solution, or best within the budget)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stage-mode", choices=("vector", "staged"), default="vector")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agvroute", description="AGV transport-task routing tools")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_, scenario=True, output=True):
        p = sub.add_parser(name, help=help_)
        if scenario:
            p.add_argument("-i", "--input", required=True, help="scenario (.lp facts or .json)")
        if output:
            p.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
        p.set_defaults(func=func)
        return p

    p = command("validate", cmd_validate, "check a solution against a scenario")
    p.add_argument("-s", "--solution", required=True)

    p = command("solve", cmd_solve, "branch-and-bound optimizer")
    _solver_flags(p)
    p.add_argument("--progress", action="store_true", help="report incumbents on stderr")

    p = command("enumerate", cmd_enumerate, "exhaustive enumeration (small instances)")
    p.add_argument("--limit", type=_positive, default=None, help="stop after this many solutions")
    p.add_argument("--continue-routes", action="store_true",
                   help="count continuations after the last completion as distinct solutions")
    p.add_argument("--idle-routes", action="store_true", help="let vehicles without tasks move as well")
    p.add_argument("--witness", action="store_true", help="include one optimal solution")

    command("baseline", cmd_baseline, "greedy round-robin with node locking")

    p = command("gen", cmd_gen, "generate instances", scenario=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=_positive, default=1)
    p.add_argument("--dir", default=None, help="write instances into this directory")
    p.add_argument("--prefix", default="inst")
    for name in ("nodes", "edges", "tasks", "vehicles", "subtasks_min", "subtasks_max", "total_subtasks"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=int, default=None)
    for name in ("halt_fraction", "park_fraction", "bidirectional_fraction", "slack"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float, default=None)
    for name in ("move_duration", "halt_duration", "park_duration"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=int, nargs=2, metavar=("LO", "HI"),
                       default=None)

    p = command("bench", cmd_bench, "run solvers over a directory of .lp files", scenario=False, output=False)
    p.add_argument("--dir", required=True)
    p.add_argument("--out", default=None, help="CSV file (default: stdout)")
    p.add_argument("--solvers", default="optimizer,baseline")
    p.add_argument("--jobs", type=_positive, default=1, help="cells run in parallel")
    _solver_flags(p, proof=False)

    p = command("convert", cmd_convert, "facts <-> JSON")
    p.add_argument("--to", choices=("lp", "json"), default=None)

    p = command("emit-atoms", cmd_emit_atoms, "assign/order/at/move atoms of a solution")
    p.add_argument("-s", "--solution", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (InputError, factio.FactError, factio.SchemaError, factio.UnknownId, ScenarioError,
            genbench.InfeasibleParams) as exc:
        _note(f"error: {exc}")
        return EXIT_INPUT
    except ValueError as exc:  # e.g. unknown solver names, bad config
        _note(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
