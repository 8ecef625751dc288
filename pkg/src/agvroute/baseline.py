"""Greedy round-robin scheduler with whole-leg node locking.

Reconstruction of a default fleet-manager behaviour: tasks are dealt to
vehicles round-robin, each vehicle drives shortest paths from subtask to
subtask, and before starting a leg it must lock every node on that leg.  A
vehicle always holds the node it stands on; other locks are released when the
leg (including its halt) completes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .model import Move, Scenario, Solution, Stop, shortest_path


@dataclass
class Failure:
    kind: str  # deadlock | deadline | unrepresentable_wait
    detail: str
    time: int
    # (waiting vehicle, blocked node, holder)
    witness: list[tuple[int, int, int]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "status": "failure",
            "kind": self.kind,
            "detail": self.detail,
            "time": self.time,
            "witness": [{"vehicle": f"c({c})", "node": f"v({v})", "held_by": f"c({h})"} for c, v, h in self.witness],
        }


@dataclass
class _Vehicle:
    vid: int
    node: int
    queue: list  # [(task, index, location)]
    route: list = field(default_factory=list)
    ready: int = 0  # time the vehicle can start its next leg
    busy_until: int | None = None  # completion time of the running leg
    leg_nodes: set = field(default_factory=set)
    bad_waits: list = field(default_factory=list)


def round_robin_assignment(s: Scenario) -> dict[int, int]:
    vehicles = sorted(s.vehicles)
    return {t: vehicles[i % len(vehicles)] for i, t in enumerate(sorted(s.tasks))} if vehicles else {}


def greedy_round_robin(s: Scenario) -> Solution | Failure:
    vehicles = sorted(s.vehicles)
    if s.tasks and not vehicles:
        return Failure("deadline", "no vehicles", 0)
    assignment = round_robin_assignment(s)
    order = {c: tuple(t for t in sorted(s.tasks) if assignment[t] == c) for c in vehicles}
    fleet = {
        c: _Vehicle(c, s.vehicles[c], [(t, j, v) for t in order[c] for j, v in enumerate(s.tasks[t].subtasks, 1)])
        for c in vehicles
    }
    locks: dict[int, int] = {s.vehicles[c]: c for c in vehicles}
    now = 0

    while True:
        # finish legs ending now
        for c in vehicles:
            veh = fleet[c]
            if veh.busy_until == now:
                t, j, v = veh.queue.pop(0)
                if now > s.tasks[t].deadline:
                    return Failure("deadline", f"t({t}) subtask {j} completes at {now} after its deadline", now)
                for node in veh.leg_nodes - {veh.node}:
                    del locks[node]
                veh.leg_nodes = set()
                veh.busy_until = None
                veh.ready = now
        # start legs in vehicle order
        waiting = []
        for c in vehicles:
            veh = fleet[c]
            if veh.busy_until is not None or not veh.queue:
                continue
            t, j, target = veh.queue[0]
            path = shortest_path(s, veh.node, target)
            if path is None:
                return Failure("deadline", f"v({target}) unreachable for c({c})", now)
            blocked = [(c, v, locks[v]) for v in path if locks.get(v, c) != c]
            if blocked:
                waiting.append(blocked)
                continue
            for v in path:
                locks[v] = c
            start = now
            if now > veh.ready:
                if veh.node in s.parks:
                    d = s.parks[veh.node]
                    k = math.ceil((now - veh.ready) / d)
                    veh.route.extend([Stop(veh.node)] * k)
                    start = veh.ready + k * d
                else:
                    veh.bad_waits.append((veh.node, veh.ready, now))
            for a, b in zip(path, path[1:]):
                veh.route.append(Move(a, b))
                start += s.edges[(a, b)]
            veh.route.append(Stop(target))
            veh.busy_until = start + s.halts[target]
            veh.leg_nodes = set(path)
            veh.node = target
        for c in vehicles:
            veh = fleet[c]
            if veh.busy_until is None and veh.queue:
                t, j, _ = veh.queue[0]
                if now > s.tasks[t].deadline:
                    return Failure("deadline", f"c({c}) still waits for t({t}) subtask {j} at {now}", now)
        running = [fleet[c].busy_until for c in vehicles if fleet[c].busy_until is not None]
        if not running:
            if waiting:
                edges = [w for ws in waiting for w in ws]
                cycle = _cycle(edges)
                if cycle is not None:
                    return Failure("deadlock", _describe(cycle), now, cycle)
                # blocked by a vehicle that has finished and never moves again
                return Failure("deadline", _describe(edges) + " (holder has finished)", now, edges)
            break
        now = min(running)

    waits = [(c, w) for c in vehicles for w in fleet[c].bad_waits]
    if waits:
        c, (node, lo, hi) = waits[0]
        return Failure(
            "unrepresentable_wait",
            f"c({c}) would wait at v({node}) from {lo} to {hi}, which is not a park node",
            lo,
        )
    return Solution(assignment, order, {c: tuple(fleet[c].route) for c in vehicles})


def _cycle(edges: list[tuple[int, int, int]]) -> list[tuple[int, int, int]] | None:
    """A wait-for cycle among ``edges``, or None."""
    by_vehicle: dict[int, list[tuple[int, int, int]]] = {}
    for e in edges:
        by_vehicle.setdefault(e[0], []).append(e)
    for start in sorted(by_vehicle):
        path: list[tuple[int, int, int]] = []
        seen = {start: 0}
        c = start
        while c in by_vehicle:
            e = by_vehicle[c][0]
            path.append(e)
            c = e[2]
            if c in seen:
                return path[seen[c]:]
            seen[c] = len(path)
    return None


def _describe(edges) -> str:
    return "; ".join(f"c({c}) needs v({v}) held by c({h})" for c, v, h in edges)
