"""Scenario and solution types for AGV transport-task routing.

Nodes, vehicles and tasks are identified by small positive integers.  The
textual ``v(N)``/``c(N)``/``t(N)`` rendering lives in :mod:`agvroute.factio`.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple, Sequence, Union


class ScenarioError(ValueError):
    """Base class for rejected scenario declarations."""


class DuplicateInitialLocation(ScenarioError):
    pass


class HaltParkOverlap(ScenarioError):
    pass


class SubtaskNotHaltNode(ScenarioError):
    pass


class NonPositiveDuration(ScenarioError):
    pass


class UndeclaredNodeInEdge(ScenarioError):
    pass


class EmptySubtaskSequence(ScenarioError):
    pass


class SelfLoopEdge(ScenarioError):
    pass


class UndeclaredReference(ScenarioError):
    """A halt, park, subtask or vehicle refers to an unknown node."""


class DuplicateDeclaration(ScenarioError):
    """The same edge, stop node, task or vehicle is declared twice with different data."""


class Unreachable(ValueError):
    def __init__(self, index: int):
        super().__init__(f"subtask {index} cannot be reached")
        self.index = index


class Move(NamedTuple):
    src: int
    dst: int


class Stop(NamedTuple):
    node: int


RouteElement = Union[Move, Stop]


def endpoint(element: RouteElement) -> int:
    return element.dst if isinstance(element, Move) else element.node


class Task(NamedTuple):
    subtasks: tuple[int, ...]
    deadline: int


class ObjectiveVector(NamedTuple):
    """Makespan, route length, crossing number, overlap number.

    Tuple comparison is the lexicographic preference order.
    """

    ms: int = 0
    rl: int = 0
    cn: int = 0
    on: int = 0


INF = float("inf")


@dataclass(frozen=True)
class Scenario:
    nodes: frozenset[int]
    edges: Mapping[tuple[int, int], int]
    halts: Mapping[int, int]
    parks: Mapping[int, int]
    tasks: Mapping[int, Task]
    vehicles: Mapping[int, int]

    def duration(self, element: RouteElement) -> int:
        if isinstance(element, Move):
            return self.edges[element]
        return self.stop_duration(element.node)

    def stop_duration(self, node: int) -> int:
        if node in self.halts:
            return self.halts[node]
        return self.parks[node]

    @cached_property
    def successors(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {v: [] for v in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
        return {v: tuple(sorted(bs)) for v, bs in out.items()}

    @cached_property
    def predecessors(self) -> dict[int, tuple[int, ...]]:
        inc: dict[int, list[int]] = {v: [] for v in self.nodes}
        for a, b in self.edges:
            inc[b].append(a)
        return {v: tuple(sorted(as_)) for v, as_ in inc.items()}

    @cached_property
    def distances(self) -> dict[int, dict[int, int]]:
        """All-pairs shortest move durations (absent key = unreachable)."""
        return {v: _dijkstra(self, v) for v in sorted(self.nodes)}

    @property
    def horizon(self) -> int:
        return horizon(self)


def _dijkstra(s: Scenario, source: int) -> dict[int, int]:
    dist = {source: 0}
    heap = [(0, source)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for w in s.successors[v]:
            nd = d + s.edges[(v, w)]
            if nd < dist.get(w, INF):
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


def shortest_path(s: Scenario, source: int, target: int) -> tuple[int, ...] | None:
    """Node sequence of a shortest path; ties go to the lexicographically
    smallest node sequence."""
    best: dict[int, tuple[int, tuple[int, ...]]] = {source: (0, (source,))}
    heap = [(0, (source,))]
    while heap:
        d, path = heapq.heappop(heap)
        v = path[-1]
        if best[v] != (d, path):
            continue
        if v == target:
            return path
        for w in s.successors[v]:
            cand = (d + s.edges[(v, w)], path + (w,))
            if w not in best or cand < best[w]:
                best[w] = cand
                heapq.heappush(heap, cand)
    return None


@dataclass(frozen=True)
class Solution:
    assignment: Mapping[int, int]
    order: Mapping[int, tuple[int, ...]]
    routes: Mapping[int, tuple[RouteElement, ...]]

    @classmethod
    def empty(cls, s: Scenario) -> "Solution":
        return cls({}, {c: () for c in s.vehicles}, {c: () for c in s.vehicles})

    def chain(self, s: Scenario, vehicle: int) -> list[tuple[int, int, int]]:
        """Pending subtasks of ``vehicle`` in completion order as
        ``(task, subtask index starting at 1, halt node)``."""
        out = []
        for t in self.order.get(vehicle, ()):
            for j, v in enumerate(s.tasks[t].subtasks, start=1):
                out.append((t, j, v))
        return out


def _check_positive(what: str, value) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise NonPositiveDuration(f"{what} must be a positive integer, got {value!r}")
    return value


def _as_mapping(pairs, what: str) -> dict:
    if isinstance(pairs, Mapping):
        return dict(pairs)
    out: dict = {}
    for key, value in pairs:
        if key in out and out[key] != value:
            raise DuplicateDeclaration(f"{what} {key} declared twice")
        out[key] = value
    return out


def build_scenario(
    nodes: Iterable[int],
    edges: Iterable[tuple[int, int, int]] | Mapping[tuple[int, int], int],
    halts: Iterable[tuple[int, int]] | Mapping[int, int] = (),
    parks: Iterable[tuple[int, int]] | Mapping[int, int] = (),
    tasks: Mapping[int, tuple[Sequence[int], int]] | Iterable = (),
    vehicles: Iterable[tuple[int, int]] | Mapping[int, int] = (),
) -> Scenario:
    """Validate raw declarations and return an immutable :class:`Scenario`.

    ``tasks`` maps a task id to ``(subtask halt nodes, deadline)``.
    """
    node_set = frozenset(nodes)
    if isinstance(edges, Mapping):
        edge_items = [(a, b, d) for (a, b), d in edges.items()]
    else:
        edge_items = list(edges)
    edge_map: dict[tuple[int, int], int] = {}
    for a, b, d in edge_items:
        if a not in node_set or b not in node_set:
            raise UndeclaredNodeInEdge(f"edge ({a},{b}) uses an undeclared node")
        if a == b:
            raise SelfLoopEdge(f"edge ({a},{a}) is a self-loop")
        _check_positive(f"move duration of ({a},{b})", d)
        if edge_map.get((a, b), d) != d:
            raise DuplicateDeclaration(f"edge ({a},{b}) declared twice")
        edge_map[(a, b)] = d

    halt_map = _as_mapping(halts, "halt")
    park_map = _as_mapping(parks, "park")
    for kind, m in (("halt", halt_map), ("park", park_map)):
        for v, d in m.items():
            if v not in node_set:
                raise UndeclaredReference(f"{kind} node {v} is not declared")
            _check_positive(f"{kind} duration of {v}", d)
    both = sorted(set(halt_map) & set(park_map))
    if both:
        raise HaltParkOverlap(f"node {both[0]} is both a halt and a park node")

    task_items = tasks.items() if isinstance(tasks, Mapping) else tasks
    task_map: dict[int, Task] = {}
    for t, (subs, deadline) in task_items:
        subs = tuple(subs)
        if not subs:
            raise EmptySubtaskSequence(f"task {t} has no subtasks")
        for v in subs:
            if v not in halt_map:
                raise SubtaskNotHaltNode(f"subtask location {v} of task {t} is not a halt node")
        _check_positive(f"deadline of task {t}", deadline)
        if t in task_map and task_map[t] != (subs, deadline):
            raise DuplicateDeclaration(f"task {t} declared twice")
        task_map[t] = Task(subs, deadline)

    vehicle_map = _as_mapping(vehicles, "vehicle")
    seen: dict[int, int] = {}
    for c in sorted(vehicle_map):
        loc = vehicle_map[c]
        if loc not in node_set:
            raise UndeclaredReference(f"initial location {loc} of vehicle {c} is not declared")
        if loc in seen:
            raise DuplicateInitialLocation(f"vehicles {seen[loc]} and {c} both start at {loc}")
        seen[loc] = c

    return Scenario(
        nodes=node_set,
        edges=dict(sorted(edge_map.items())),
        halts=dict(sorted(halt_map.items())),
        parks=dict(sorted(park_map.items())),
        tasks=dict(sorted(task_map.items())),
        vehicles=dict(sorted(vehicle_map.items())),
    )


def horizon(s: Scenario) -> int:
    return max((t.deadline for t in s.tasks.values()), default=0)


def less_pairs(s: Scenario) -> list[tuple[int, int, int]]:
    """Consecutive predecessor pairs ``(v', v'', v)`` with ``v' < v''``."""
    out = []
    for v in sorted(s.nodes):
        preds = s.predecessors[v]
        out.extend((a, b, v) for a, b in zip(preds, preds[1:]))
    return out


def bidirectional_pairs(s: Scenario) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    return [((a, b), (b, a)) for a, b in s.edges if a < b and (b, a) in s.edges]


def min_completion_time(s: Scenario, start: int, subtasks: Sequence[int]) -> int:
    """Shortest conflict-free-ignoring duration for halting at ``subtasks`` in
    order, starting at ``start``.  Raises :class:`Unreachable`."""
    total = 0
    here = start
    for i, v in enumerate(subtasks, start=1):
        d = s.distances[here].get(v)
        if d is None:
            raise Unreachable(i)
        total += d + s.halts[v]
        here = v
    return total


@dataclass
class ChainTable:
    """Per-position lookup tables for one vehicle's subtask chain.

    ``rest[k][v]`` is the least duration needed from node ``v`` to complete
    chain positions ``k..``; ``latest[k][v]`` is the latest time a vehicle may
    stand at ``v`` with position ``k`` pending and still meet every deadline.
    """

    locations: tuple[int, ...]
    deadlines: tuple[int, ...]
    rest: list[dict[int, float]] = field(default_factory=list)
    latest: list[dict[int, float]] = field(default_factory=list)


def chain_table(s: Scenario, locations: Sequence[int], deadlines: Sequence[int]) -> ChainTable:
    m = len(locations)
    dist = s.distances
    nodes = sorted(s.nodes)
    rest: list[dict[int, float]] = [dict() for _ in range(m + 1)]
    latest: list[dict[int, float]] = [dict() for _ in range(m + 1)]
    rest[m] = {v: 0 for v in nodes}
    latest[m] = {v: INF for v in nodes}
    for k in range(m - 1, -1, -1):
        target = locations[k]
        halt = s.halts[target]
        for v in nodes:
            d = dist[v].get(target)
            if d is None or rest[k + 1][target] == INF:
                rest[k][v] = INF
                latest[k][v] = -INF
                continue
            step = d + halt
            rest[k][v] = step + rest[k + 1][target]
            latest[k][v] = min(deadlines[k] - step, latest[k + 1][target] - step)
    return ChainTable(tuple(locations), tuple(deadlines), rest, latest)
