"""Instance generator (ring corridors with park bays) and benchmark harness."""
from __future__ import annotations

import csv
import io
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .model import Scenario, build_scenario, min_completion_time
from .optimizer import SolverConfig

CSV_HEADER = ["instance", "solver", "status", "ms", "rl", "cn", "on", "wall_ms", "nodes_expanded", "proven_optimal"]
SOLVERS = ("optimizer", "baseline", "oracle")


class InfeasibleParams(ValueError):
    pass


@dataclass(frozen=True)
class GenParams:
    nodes: int = 25
    edges: int = 35
    halt_fraction: float = 0.4
    park_fraction: float = 0.08
    tasks: int = 10
    subtasks_min: int = 3
    subtasks_max: int = 5
    vehicles: int = 4
    slack: float = 1.6
    bidirectional_fraction: float = 0.3
    seed: int = 0
    total_subtasks: int | None = None
    move_duration: tuple[int, int] = (2, 5)
    halt_duration: tuple[int, int] = (1, 3)
    park_duration: tuple[int, int] = (1, 2)

    def check(self):
        for name in ("nodes", "edges", "vehicles"):
            if getattr(self, name) <= 0:
                raise InfeasibleParams(f"{name} must be positive")
        if self.tasks < 0 or self.subtasks_min <= 0 or self.subtasks_max < self.subtasks_min:
            raise InfeasibleParams("bad task/subtask counts")
        for name in ("halt_fraction", "park_fraction", "bidirectional_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InfeasibleParams(f"{name} must lie in [0, 1]")
        if self.slack < 1.0:
            raise InfeasibleParams("slack must be >= 1")
        for name in ("move_duration", "halt_duration", "park_duration"):
            lo, hi = getattr(self, name)
            if lo <= 0 or hi < lo:
                raise InfeasibleParams(f"{name} must be a positive range")
        if self.vehicles > self.nodes:
            raise InfeasibleParams(f"{self.vehicles} vehicles cannot start at distinct nodes of {self.nodes}")


def generate(p: GenParams) -> Scenario:
    """Random scenario: a one-way ring with chords, some of them two-way, and
    park bays hanging off the ring.  Deterministic for a fixed seed."""
    p.check()
    rng = random.Random(p.seed)
    parks_n = round(p.park_fraction * p.nodes)
    ring_n = p.nodes - parks_n
    if ring_n < 2:
        raise InfeasibleParams("need at least two ring nodes")
    base_edges = ring_n + 2 * parks_n
    max_edges = ring_n * (ring_n - 1) + 2 * parks_n
    if not base_edges <= p.edges <= max_edges:
        raise InfeasibleParams(f"edge count must lie in [{base_edges}, {max_edges}] for this layout")
    halts_n = max(1, round(p.halt_fraction * p.nodes)) if p.tasks else round(p.halt_fraction * p.nodes)
    if halts_n > ring_n:
        raise InfeasibleParams("more halt nodes than ring nodes")

    ring = list(range(1, ring_n + 1))
    rng.shuffle(ring)
    edges: set[tuple[int, int]] = {(ring[i], ring[(i + 1) % ring_n]) for i in range(ring_n)}
    park_nodes = list(range(ring_n + 1, p.nodes + 1))
    for v in park_nodes:
        anchor = rng.randrange(1, ring_n + 1)
        edges |= {(v, anchor), (anchor, v)}
    remaining = p.edges - len(edges)
    candidates = [(a, b) for a in range(1, ring_n + 1) for b in range(1, ring_n + 1) if a != b and (a, b) not in edges]
    rng.shuffle(candidates)
    for a, b in candidates:
        if remaining == 0:
            break
        if (a, b) in edges:
            continue
        edges.add((a, b))
        remaining -= 1
        if remaining and (b, a) not in edges and rng.random() < p.bidirectional_fraction:
            edges.add((b, a))
            remaining -= 1

    halt_nodes = sorted(rng.sample(range(1, ring_n + 1), halts_n))
    edge_list = [(a, b, rng.randint(*p.move_duration)) for a, b in sorted(edges)]
    halts = {v: rng.randint(*p.halt_duration) for v in halt_nodes}
    parks = {v: rng.randint(*p.park_duration) for v in park_nodes}
    starts = rng.sample(range(1, p.nodes + 1), p.vehicles)
    vehicles = {c: starts[c - 1] for c in range(1, p.vehicles + 1)}

    sizes = _subtask_counts(p, rng)
    sequences = []
    for k in sizes:
        seq = []
        for _ in range(k):
            choices = [v for v in halt_nodes if not seq or v != seq[-1]] or halt_nodes
            seq.append(rng.choice(choices))
        sequences.append(seq)

    draft = build_scenario(range(1, p.nodes + 1), edge_list, halts, parks, {}, vehicles)
    tasks = {}
    # deadlines from a round-robin plan: each vehicle serves its tasks in id order
    progress = {c: (vehicles[c], 0) for c in vehicles}
    for i, seq in enumerate(sequences):
        t = i + 1
        c = (i % p.vehicles) + 1
        here, elapsed = progress[c]
        elapsed += min_completion_time(draft, here, seq)
        progress[c] = (seq[-1], elapsed)
        tasks[t] = (seq, max(1, math.ceil(p.slack * elapsed)))
    return build_scenario(range(1, p.nodes + 1), edge_list, halts, parks, tasks, vehicles)


def _subtask_counts(p: GenParams, rng: random.Random) -> list[int]:
    if p.total_subtasks is None:
        return [rng.randint(p.subtasks_min, p.subtasks_max) for _ in range(p.tasks)]
    lo, hi = p.tasks * p.subtasks_min, p.tasks * p.subtasks_max
    if not lo <= p.total_subtasks <= hi:
        raise InfeasibleParams(f"total_subtasks must lie in [{lo}, {hi}]")
    sizes = [p.subtasks_min] * p.tasks
    for _ in range(p.total_subtasks - lo):
        open_ = [i for i, k in enumerate(sizes) if k < p.subtasks_max]
        sizes[rng.choice(open_)] += 1
    return sizes


# ------------------------------------------------------------------ bench


def _run_cell(args) -> dict:
    path, solver, cfg = args
    from .baseline import Failure, greedy_round_robin
    from .factio import parse_facts
    from .oracle import best_by_enumeration, Infeasible
    from .optimizer import solve
    from .validation import objectives

    row = {k: "" for k in CSV_HEADER}
    row.update(instance=Path(path).stem, solver=solver)
    t0 = time.perf_counter()
    try:
        s = parse_facts(Path(path).read_text(encoding="utf-8"))
        if solver == "optimizer":
            out = solve(s, cfg)
            row.update(status=out.status, nodes_expanded=out.stats.nodes_expanded,
                       proven_optimal=out.stats.proven_optimal)
            obj = out.objectives
        elif solver == "baseline":
            res = greedy_round_robin(s)
            if isinstance(res, Failure):
                row["status"] = res.kind
                obj = None
            else:
                row["status"] = "feasible"
                obj = objectives(s, res)
        else:
            try:
                obj, _, _ = best_by_enumeration(s)
                row.update(status="optimal", proven_optimal=True)
            except Infeasible:
                obj = None
                row.update(status="infeasible", proven_optimal=True)
        if obj is not None:
            row.update(ms=obj.ms, rl=obj.rl, cn=obj.cn, on=obj.on)
    except Exception as exc:  # recorded per cell; the run continues
        row.update(status="error")
        row["nodes_expanded"] = ""
        row["proven_optimal"] = ""
    row["wall_ms"] = round((time.perf_counter() - t0) * 1000, 1)
    return row


def run_bench(instances: str | Path, cfg: SolverConfig, solvers: Iterable[str] = ("optimizer", "baseline"),
              workers: int = 1) -> list[dict]:
    """One record per (instance, solver) for every ``.lp`` file in ``instances``."""
    solvers = sorted(set(solvers))
    unknown = set(solvers) - set(SOLVERS)
    if unknown:
        raise ValueError(f"unknown solvers: {sorted(unknown)}")
    files = sorted(Path(instances).glob("*.lp"))
    cells = [(str(f), name, cfg) for f in files for name in solvers]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, cells))
    else:
        rows = [_run_cell(cell) for cell in cells]
    rows.sort(key=lambda r: (r["instance"], r["solver"]))
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in CSV_HEADER})
    return buf.getvalue()
