"""Feasibility conditions and objective evaluation for routing solutions."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .model import (
    Move,
    ObjectiveVector,
    RouteElement,
    Scenario,
    Solution,
    Stop,
    endpoint,
)


class InfeasibleSolution(ValueError):
    def __init__(self, conflicts):
        self.conflicts = list(conflicts)
        first = self.conflicts[0] if self.conflicts else "unknown"
        super().__init__(f"solution is infeasible: {first}")


@dataclass(frozen=True)
class Conflict:
    @property
    def kind(self) -> str:
        return type(self).__name__

    def as_dict(self) -> dict:
        out = {"kind": self.kind}
        out.update({k: v for k, v in self.__dict__.items()})
        return out


@dataclass(frozen=True)
class NodeConflict(Conflict):
    node: int
    time: int
    vehicles: tuple[int, int]


@dataclass(frozen=True)
class SwapConflict(Conflict):
    edge: tuple[int, int]
    time: int
    vehicles: tuple[int, int]


@dataclass(frozen=True)
class ConnectivityViolation(Conflict):
    vehicle: int | None
    position: int


@dataclass(frozen=True)
class InvalidElement(Conflict):
    """A route element that is neither a connection nor a halt/park node."""

    vehicle: int
    position: int


@dataclass(frozen=True)
class IllegalHalt(Conflict):
    vehicle: int
    position: int


@dataclass(frozen=True)
class DeadlineMiss(Conflict):
    task: int
    subtask: int
    time: int | None = None


@dataclass(frozen=True)
class UnorderedSharedTasks(Conflict):
    vehicle: int


def check_connectivity(
    route: Sequence[RouteElement], start: int, vehicle: int | None = None
) -> ConnectivityViolation | None:
    """Return the first element (1-based position) not attached to its predecessor."""
    here = start
    for i, el in enumerate(route, start=1):
        src = el.src if isinstance(el, Move) else el.node
        if src != here:
            return ConnectivityViolation(vehicle, i)
        here = endpoint(el)
    return None


@dataclass
class CompletionSchedule:
    # (task, subtask) -> (route position, completion time)
    completions: dict[tuple[int, int], tuple[int, int]] = field(default_factory=dict)
    # vehicle -> [(position, task, subtask, time)]
    halts: dict[int, list[tuple[int, int, int, int]]] = field(default_factory=dict)
    violations: list[Conflict] = field(default_factory=list)


def _order_consistency(s: Scenario, sol: Solution) -> list[Conflict]:
    bad: set[int] = set()
    for t, c in sol.assignment.items():
        if c not in s.vehicles or t not in s.tasks:
            bad.add(c)
    for c, seq in sol.order.items():
        if len(set(seq)) != len(seq) or any(sol.assignment.get(t) != c for t in seq):
            bad.add(c)
    for t, c in sol.assignment.items():
        if t not in sol.order.get(c, ()):
            bad.add(c)
    return [UnorderedSharedTasks(c) for c in sorted(bad)]


def completion_schedule(s: Scenario, sol: Solution) -> CompletionSchedule:
    """Match halts against pending subtasks and check deadlines.

    Each halt must complete exactly the vehicle's next pending subtask; park
    stops complete nothing.  Per vehicle only the first violation is kept.
    """
    sched = CompletionSchedule()
    sched.violations.extend(_order_consistency(s, sol))
    if sched.violations:
        return sched
    for c in sorted(s.vehicles):
        chain = sol.chain(s, c)
        route = sol.routes.get(c, ())
        k = 0
        elapsed = 0
        trace: list[tuple[int, int, int, int]] = []
        failed = False
        for i, el in enumerate(route, start=1):
            elapsed += s.duration(el)
            if isinstance(el, Stop) and el.node in s.halts:
                if k >= len(chain) or chain[k][2] != el.node:
                    sched.violations.append(IllegalHalt(c, i))
                    failed = True
                    break
                t, j, _ = chain[k]
                if elapsed > s.tasks[t].deadline:
                    sched.violations.append(DeadlineMiss(t, j, elapsed))
                    failed = True
                    break
                sched.completions[(t, j)] = (i, elapsed)
                trace.append((i, t, j, elapsed))
                k += 1
        sched.halts[c] = trace
        if not failed and k < len(chain):
            t, j, _ = chain[k]
            sched.violations.append(DeadlineMiss(t, j))
    for t, task in s.tasks.items():
        if t not in sol.assignment:
            sched.violations.append(DeadlineMiss(t, 1))
    return sched


@dataclass
class Occupation:
    """Occupation times of one vehicle: node -> sorted times, edge -> sorted times."""

    nodes: dict[int, list[int]] = field(default_factory=dict)
    edges: dict[tuple[int, int], list[int]] = field(default_factory=dict)


def occupation_times(s: Scenario, vehicle: int, route: Sequence[RouteElement]) -> Occupation:
    nodes: dict[int, list[int]] = defaultdict(list)
    edges: dict[tuple[int, int], list[int]] = defaultdict(list)
    nodes[s.vehicles[vehicle]].append(0)
    prefix = 0
    for el in route:
        d = s.duration(el)
        if isinstance(el, Move):
            edges[(el.src, el.dst)].extend(range(prefix + 1, prefix + d + 1))
            nodes[el.dst].append(prefix + d)
        else:
            nodes[el.node].extend(range(prefix + 1, prefix + d + 1))
        prefix += d
    return Occupation(
        {v: sorted(ts) for v, ts in nodes.items()},
        {e: sorted(ts) for e, ts in edges.items()},
    )


def occupation_map(s: Scenario, sol: Solution) -> dict[int, Occupation]:
    return {c: occupation_times(s, c, sol.routes.get(c, ())) for c in sorted(s.vehicles)}


def _conflict_sort_key(cf: Conflict):
    loc = cf.node if isinstance(cf, NodeConflict) else cf.edge
    return (cf.time, 0 if isinstance(cf, NodeConflict) else 1, str(loc), cf.vehicles)


def check_conflicts(s: Scenario, occ: Mapping[int, Occupation]) -> list[Conflict]:
    at: dict[tuple[int, int], list[int]] = defaultdict(list)
    on_edge: dict[tuple[int, int, int], list[int]] = defaultdict(list)
    for c in sorted(occ):
        for v, ts in occ[c].nodes.items():
            for t in ts:
                at[(v, t)].append(c)
        for e, ts in occ[c].edges.items():
            for t in ts:
                on_edge[(e[0], e[1], t)].append(c)
    out: list[Conflict] = []
    for (v, t), cs in at.items():
        for pair in combinations(sorted(set(cs)), 2):
            out.append(NodeConflict(v, t, pair))
    for (a, b, t), cs in on_edge.items():
        if a > b:
            continue
        rev = on_edge.get((b, a, t), ())
        for c in cs:
            for c2 in rev:
                if c != c2:
                    out.append(SwapConflict((a, b), t, tuple(sorted((c, c2)))))
    return sorted(set(out), key=_conflict_sort_key)


def route_edges(route: Iterable[RouteElement]) -> set[tuple[int, int]]:
    return {(el.src, el.dst) for el in route if isinstance(el, Move)}


def crossing_number(edge_sets: Mapping[int, set[tuple[int, int]]]) -> int:
    """Pairs ({c, c'}, v) where c and c' enter v from distinct predecessors."""
    preds: dict[int, dict[int, set[int]]] = {}
    for c, es in edge_sets.items():
        m: dict[int, set[int]] = defaultdict(set)
        for a, b in es:
            m[b].add(a)
        preds[c] = m
    count = 0
    for c, c2 in combinations(sorted(edge_sets), 2):
        p1, p2 = preds[c], preds[c2]
        for v in p1.keys() & p2.keys():
            a, b = p1[v], p2[v]
            if not (len(a) == 1 and a == b):
                count += 1
    return count


def overlap_number(edge_sets: Mapping[int, set[tuple[int, int]]]) -> int:
    """Triples ({c, c'}, e, e') with e' equal to e or to its reverse."""
    count = 0
    for c, c2 in combinations(sorted(edge_sets), 2):
        other = edge_sets[c2]
        for a, b in edge_sets[c]:
            count += ((a, b) in other) + ((b, a) in other)
    return count


def objectives(s: Scenario, sol: Solution) -> ObjectiveVector:
    """Objective vector without any feasibility check."""
    sums = [sum(s.duration(el) for el in sol.routes.get(c, ())) for c in s.vehicles]
    edge_sets = {c: route_edges(sol.routes.get(c, ())) for c in s.vehicles}
    return ObjectiveVector(
        max(sums, default=0),
        sum(sums),
        crossing_number(edge_sets),
        overlap_number(edge_sets),
    )


@dataclass
class ValidationReport:
    feasible: bool
    conflicts: list[Conflict]
    schedule: CompletionSchedule | None = None
    objectives: ObjectiveVector | None = None

    def as_dict(self) -> dict:
        out: dict = {
            "feasible": self.feasible,
            "conflicts": [c.as_dict() for c in self.conflicts],
            "objectives": self.objectives._asdict() if self.objectives else None,
        }
        if self.schedule is not None:
            out["completions"] = [
                {"task": t, "subtask": j, "position": pos, "time": time}
                for (t, j), (pos, time) in sorted(self.schedule.completions.items())
            ]
        return out


def _element_problems(s: Scenario, sol: Solution) -> list[Conflict]:
    out: list[Conflict] = []
    for c, route in sorted(sol.routes.items()):
        if c not in s.vehicles:
            out.append(UnorderedSharedTasks(c))
            continue
        for i, el in enumerate(route, start=1):
            if isinstance(el, Move):
                ok = (el.src, el.dst) in s.edges
            else:
                ok = el.node in s.halts or el.node in s.parks
            if not ok:
                out.append(InvalidElement(c, i))
                break
    return out


def validate(s: Scenario, sol: Solution) -> ValidationReport:
    """Check connectivity, completion, and conflicts in that order."""
    problems = _element_problems(s, sol)
    if problems:
        return ValidationReport(False, problems)
    broken = []
    for c in sorted(s.vehicles):
        v = check_connectivity(sol.routes.get(c, ()), s.vehicles[c], c)
        if v is not None:
            broken.append(v)
    if broken:
        return ValidationReport(False, broken)
    sched = completion_schedule(s, sol)
    if sched.violations:
        return ValidationReport(False, list(sched.violations), sched)
    conflicts = check_conflicts(s, occupation_map(s, sol))
    if conflicts:
        return ValidationReport(False, conflicts, sched)
    return ValidationReport(True, [], sched, objectives(s, sol))


def evaluate(s: Scenario, sol: Solution) -> ObjectiveVector:
    report = validate(s, sol)
    if not report.feasible:
        raise InfeasibleSolution(report.conflicts)
    return report.objectives
