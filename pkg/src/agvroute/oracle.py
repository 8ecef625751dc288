"""Exhaustive enumeration of feasible solutions on small instances.

Routes are enumerated per vehicle (depth first, moves before stops, targets in
numeric order) and then combined across vehicles.  Conflicts between vehicles
are tested with integer bitmasks over (location, time) slots.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import permutations, product
from typing import Iterator

from .model import (
    ObjectiveVector,
    Scenario,
    Solution,
    Move,
    Stop,
    bidirectional_pairs,
    chain_table,
    horizon,
)
from .validation import crossing_number, overlap_number


class LimitReached(RuntimeError):
    def __init__(self, count: int):
        super().__init__(f"enumeration stopped after {count} solutions")
        self.count = count


class Infeasible(RuntimeError):
    pass


@dataclass(frozen=True)
class Canonicalization:
    """Rules that make the set of feasible solutions finite.

    With ``routes_end_at_last_completion`` a busy vehicle's route ends with the
    halt completing its last subtask; otherwise any continuation by moves and
    park stops that stays within the horizon counts as a separate solution.
    ``idle_vehicles_empty_route`` does the same for vehicles without tasks.
    Task orders only relate tasks that share a vehicle.
    """

    routes_end_at_last_completion: bool = True
    idle_vehicles_empty_route: bool = True
    order_minimal: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class _Route:
    elements: tuple
    length: int
    node_mask: int
    fwd_mask: int
    bwd_mask: int
    edges: frozenset


class _Slots:
    """Bit positions for (node, time) and (bidirectional pair, time)."""

    def __init__(self, s: Scenario):
        self.width = horizon(s) + 1
        self.node_index = {v: i for i, v in enumerate(sorted(s.nodes))}
        self.pair_index = {}
        for i, ((a, b), _) in enumerate(bidirectional_pairs(s)):
            self.pair_index[(a, b)] = (i, True)
            self.pair_index[(b, a)] = (i, False)

    def node_bits(self, v: int, lo: int, hi: int) -> int:
        base = self.node_index[v] * self.width
        return ((1 << (hi - lo + 1)) - 1) << (base + lo)

    def edge_bits(self, e, lo: int, hi: int) -> tuple[int, int]:
        slot = self.pair_index.get(e)
        if slot is None:
            return 0, 0
        i, forward = slot
        bits = ((1 << (hi - lo + 1)) - 1) << (i * self.width + lo)
        return (bits, 0) if forward else (0, bits)


def _vehicle_routes(s: Scenario, vehicle: int, tasks: tuple, canon: Canonicalization, slots: _Slots) -> list[_Route]:
    chain = [(t, v) for t in tasks for v in s.tasks[t].subtasks]
    locs = [v for _, v in chain]
    table = chain_table(s, locs, [s.tasks[t].deadline for t, _ in chain])
    m = len(chain)
    h = horizon(s)
    trailing = (not canon.routes_end_at_last_completion) if m else (not canon.idle_vehicles_empty_route)
    start = s.vehicles[vehicle]
    out: list[_Route] = []
    elements: list = []
    used_edges: list = []

    def emit(time, nmask, fmask, bmask):
        out.append(_Route(tuple(elements), time, nmask, fmask, bmask, frozenset(used_edges)))

    def walk(node, time, k, nmask, fmask, bmask):
        if k == m:
            emit(time, nmask, fmask, bmask)
            if not trailing:
                return
        elif time > table.latest[k][node]:
            return
        for w in s.successors[node]:
            d = s.edges[(node, w)]
            end = time + d
            if k == m and end > h:
                continue
            f, b = slots.edge_bits((node, w), time + 1, end)
            elements.append(Move(node, w))
            used_edges.append((node, w))
            walk(w, end, k, nmask | slots.node_bits(w, end, end), fmask | f, bmask | b)
            used_edges.pop()
            elements.pop()
        if k < m and node == locs[k]:
            end = time + s.halts[node]
            if end <= table.deadlines[k]:
                elements.append(Stop(node))
                walk(node, end, k + 1, nmask | slots.node_bits(node, time + 1, end), fmask, bmask)
                elements.pop()
        if node in s.parks:
            end = time + s.parks[node]
            if k < m or end <= h:
                elements.append(Stop(node))
                walk(node, end, k, nmask | slots.node_bits(node, time + 1, end), fmask, bmask)
                elements.pop()

    walk(start, 0, 0, slots.node_bits(start, 0, 0), 0, 0)
    return out


def _assignments(s: Scenario) -> Iterator[tuple[dict, dict]]:
    tasks = sorted(s.tasks)
    vehicles = sorted(s.vehicles)
    if not vehicles and tasks:
        return
    for choice in product(vehicles, repeat=len(tasks)):
        assignment = dict(zip(tasks, choice))
        per_vehicle = [[t for t in tasks if assignment[t] == c] for c in vehicles]
        for orders in product(*(permutations(ts) for ts in per_vehicle)):
            yield assignment, dict(zip(vehicles, orders))


def _stream(s: Scenario, canon: Canonicalization) -> Iterator[tuple[Solution, ObjectiveVector]]:
    slots = _Slots(s)
    vehicles = sorted(s.vehicles)
    cache: dict[tuple, list[_Route]] = {}
    for assignment, order in _assignments(s):
        options = []
        for c in vehicles:
            key = (c, order[c])
            if key not in cache:
                cache[key] = _vehicle_routes(s, c, order[c], canon, slots)
            options.append(cache[key])
        if any(not opts for opts in options):
            continue
        yield from _combine(vehicles, options, assignment, order)


def _combine(vehicles, options, assignment, order):
    n = len(vehicles)
    chosen: list[_Route] = []

    def rec(i, nmask, fmask, bmask):
        if i == n:
            lengths = [r.length for r in chosen]
            edge_sets = {c: r.edges for c, r in zip(vehicles, chosen)}
            obj = ObjectiveVector(
                max(lengths, default=0),
                sum(lengths),
                crossing_number(edge_sets),
                overlap_number(edge_sets),
            )
            sol = Solution(
                dict(assignment),
                dict(order),
                {c: r.elements for c, r in zip(vehicles, chosen)},
            )
            yield sol, obj
            return
        for r in options[i]:
            if r.node_mask & nmask or r.fwd_mask & bmask or r.bwd_mask & fmask:
                continue
            chosen.append(r)
            yield from rec(i + 1, nmask | r.node_mask, fmask | r.fwd_mask, bmask | r.bwd_mask)
            chosen.pop()

    yield from rec(0, 0, 0, 0)


def iter_feasible(s: Scenario, canon: Canonicalization = Canonicalization()) -> Iterator[Solution]:
    """Every canonical feasible solution, each exactly once."""
    for sol, _ in _stream(s, canon):
        yield sol


@dataclass
class EnumerationResult:
    count: int
    optimum: ObjectiveVector | None
    optima_count: int
    witness: Solution | None
    canonicalization: Canonicalization

    def as_dict(self) -> dict:
        return {
            "feasible_count": self.count,
            "optima_count": self.optima_count,
            "objectives": self.optimum._asdict() if self.optimum else None,
            "canonicalization": self.canonicalization.as_dict(),
        }


def enumerate_feasible(
    s: Scenario, canon: Canonicalization = Canonicalization(), limit: int | None = None
) -> EnumerationResult:
    """Count canonical feasible solutions and track the lexicographic optimum.

    Raises :class:`LimitReached` once more than ``limit`` solutions are seen.
    """
    count = 0
    best = None
    best_count = 0
    witness = None
    for sol, obj in _stream(s, canon):
        count += 1
        if limit is not None and count > limit:
            raise LimitReached(limit)
        if best is None or obj < best:
            best, best_count, witness = obj, 1, sol
        elif obj == best:
            best_count += 1
    return EnumerationResult(count, best, best_count, witness, canon)


def best_by_enumeration(
    s: Scenario, canon: Canonicalization = Canonicalization()
) -> tuple[ObjectiveVector, int, Solution]:
    res = enumerate_feasible(s, canon)
    if res.optimum is None:
        raise Infeasible("no feasible solution")
    return res.optimum, res.optima_count, res.witness
