"""Lexicographic branch-and-bound over assignment, task order and joint routes.

The search branches on task assignment first (tasks in id order), then on the
per-vehicle task permutation, and finally on a time-expanded joint route
search that always extends the vehicle with the smallest clock.  Every
committed route element is checked against the occupation already committed
by the other vehicles, so the partial plan is conflict-free at every node.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Callable, Sequence

from .model import (
    INF,
    ChainTable,
    Move,
    ObjectiveVector,
    Scenario,
    Solution,
    Stop,
    chain_table,
    endpoint,
    horizon,
)

log = logging.getLogger(__name__)

PERMUTATION_LIMIT = 6  # exact best-order bound for at most this many tasks per vehicle


@dataclass(frozen=True)
class SolverConfig:
    budget_ms: int | None = None
    workers: int = 1
    prove_optimal: bool = True
    seed: int = 0
    stage_mode: str = "vector"  # or "staged"

    def stops_at_first(self) -> bool:
        # without a proof request the search is anytime within the budget,
        # and returns the first solution when there is no budget
        return not self.prove_optimal and self.budget_ms is None

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.stage_mode not in ("vector", "staged"):
            raise ValueError(f"unknown stage mode {self.stage_mode!r}")


@dataclass
class SolveStats:
    nodes_expanded: int = 0
    proven_optimal: bool = False
    elapsed_ms: float = 0.0
    incumbents: list[tuple[float, ObjectiveVector]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "nodes_expanded": self.nodes_expanded,
            "proven_optimal": self.proven_optimal,
            "elapsed_ms": round(self.elapsed_ms, 1),
            "incumbents": [[round(t, 1), list(v)] for t, v in self.incumbents],
        }


@dataclass
class SolveOutcome:
    status: str  # optimal | feasible | infeasible | budget_exhausted_no_solution
    solution: Solution | None
    objectives: ObjectiveVector | None
    stats: SolveStats


class _BudgetExhausted(Exception):
    pass


class _FirstSolution(Exception):
    pass


# ------------------------------------------------------------------ state


class SearchState:
    """Partial joint plan for a fixed assignment and task order.

    Vehicles are indexed by position in sorted vehicle-id order.  Committed
    occupation is kept in flat owner arrays indexed by ``location * width +
    time`` (0 = free, otherwise vehicle index + 1).
    """

    def __init__(self, s: Scenario, order: dict[int, tuple[int, ...]]):
        self.s = s
        self.vehicle_ids = sorted(s.vehicles)
        self.order = order
        n = len(self.vehicle_ids)
        self.width = horizon(s) + 2
        self.node_index = {v: i for i, v in enumerate(sorted(s.nodes))}
        self.edge_index: dict[tuple[int, int], int] = {}
        for (a, b) in s.edges:
            if (b, a) in s.edges:
                self.edge_index[(a, b)] = len(self.edge_index)
        cells = bytearray if n < 255 else (lambda size: [0] * size)
        self.node_owner = cells(len(self.node_index) * self.width)
        self.edge_owner = cells(len(self.edge_index) * self.width)
        self.tables: list[ChainTable] = []
        self.locs: list[tuple[int, ...]] = []
        self.chain_tasks: list[list[tuple[int, int]]] = []
        for c in self.vehicle_ids:
            chain = [(t, j) for t in order.get(c, ()) for j in range(1, len(s.tasks[t].subtasks) + 1)]
            locs = [s.tasks[t].subtasks[j - 1] for t, j in chain]
            self.chain_tasks.append(chain)
            self.locs.append(tuple(locs))
            self.tables.append(chain_table(s, locs, [s.tasks[t].deadline for t, _ in chain]))
        self.node = [s.vehicles[c] for c in self.vehicle_ids]
        self.time = [0] * n
        self.pending = [0] * n
        self.routes: list[list] = [[] for _ in range(n)]
        self.edge_use: list[dict[tuple[int, int], int]] = [dict() for _ in range(n)]
        self.lb = [self.tables[i].rest[0][self.node[i]] for i in range(n)]
        for i in range(n):
            self._mark_node(self.node[i], 0, 0, i + 1)

    # occupation bookkeeping -------------------------------------------------

    def _mark_node(self, v, lo, hi, owner):
        base = self.node_index[v] * self.width
        for t in range(lo, hi + 1):
            self.node_owner[base + t] = owner

    def node_free(self, v, lo, hi, me) -> bool:
        base = self.node_index[v] * self.width
        owner = self.node_owner
        for t in range(base + lo, base + hi + 1):
            o = owner[t]
            if o and o != me:
                return False
        return True

    def edge_free(self, a, b, lo, hi, me) -> bool:
        rev = self.edge_index.get((b, a))
        if rev is None:
            return True
        base = rev * self.width
        owner = self.edge_owner
        for t in range(base + lo, base + hi + 1):
            o = owner[t]
            if o and o != me:
                return False
        return True

    # element application ----------------------------------------------------

    def finished(self, i: int) -> bool:
        return self.pending[i] == len(self.locs[i])

    def next_vehicle(self) -> int | None:
        best = None
        for i in range(len(self.vehicle_ids)):
            if self.pending[i] < len(self.locs[i]) and (best is None or self.time[i] < self.time[best]):
                best = i
        return best

    def push(self, i: int, element, end: int, new_pending: int, new_lb):
        """Commit ``element`` for vehicle ``i``; returns an undo record."""
        t0 = self.time[i]
        me = i + 1
        if isinstance(element, Move):
            a, b = element
            idx = self.edge_index.get((a, b))
            if idx is not None:
                base = idx * self.width
                for t in range(t0 + 1, end + 1):
                    self.edge_owner[base + t] = me
            self.node_owner[self.node_index[b] * self.width + end] = me
            uses = self.edge_use[i]
            uses[(a, b)] = uses.get((a, b), 0) + 1
            self.node[i] = b
        else:
            self._mark_node(element.node, t0 + 1, end, me)
        record = (i, element, t0, self.pending[i], self.lb[i])
        self.routes[i].append(element)
        self.time[i] = end
        self.pending[i] = new_pending
        self.lb[i] = new_lb
        return record

    def apply(self, i: int, element):
        """Commit ``element`` for vehicle ``i``, deriving its end time,
        completion and new bound; returns the undo record."""
        s = self.s
        k = self.pending[i]
        end = self.time[i] + s.duration(element)
        if isinstance(element, Stop) and k < len(self.locs[i]) and self.locs[i][k] == element.node:
            k += 1
        return self.push(i, element, end, k, end + self.tables[i].rest[k][endpoint(element)])

    def pop(self, record):
        i, element, t0, pending, lb = record
        end = self.time[i]
        if isinstance(element, Move):
            a, b = element
            idx = self.edge_index.get((a, b))
            if idx is not None:
                base = idx * self.width
                for t in range(t0 + 1, end + 1):
                    self.edge_owner[base + t] = 0
            self.node_owner[self.node_index[b] * self.width + end] = 0
            uses = self.edge_use[i]
            if uses[(a, b)] == 1:
                del uses[(a, b)]
            else:
                uses[(a, b)] -= 1
            self.node[i] = a
        else:
            self._mark_node(element.node, t0 + 1, end, 0)
        self.routes[i].pop()
        self.time[i] = t0
        self.pending[i] = pending
        self.lb[i] = lb

    # objectives -------------------------------------------------------------

    def crossings_and_overlaps(self) -> tuple[int, int]:
        n = len(self.vehicle_ids)
        preds = []
        for i in range(n):
            m: dict[int, set[int]] = {}
            for a, b in self.edge_use[i]:
                m.setdefault(b, set()).add(a)
            preds.append(m)
        cn = on = 0
        for i in range(n):
            ui, pi = self.edge_use[i], preds[i]
            for j in range(i + 1, n):
                uj, pj = self.edge_use[j], preds[j]
                for v, a in pi.items():
                    b = pj.get(v)
                    if b is not None and not (len(a) == 1 and a == b):
                        cn += 1
                for a, b in ui:
                    on += ((a, b) in uj) + ((b, a) in uj)
        return cn, on

    def solution(self, assignment: dict[int, int]) -> Solution:
        return Solution(
            dict(sorted(assignment.items())),
            {c: tuple(self.order.get(c, ())) for c in self.vehicle_ids},
            {c: tuple(self.routes[i]) for i, c in enumerate(self.vehicle_ids)},
        )


def bound(state: SearchState) -> ObjectiveVector:
    """Admissible lower bound on any completion of ``state``.

    Makespan and route length use each vehicle's clock plus the shortest
    remaining chain; crossings and overlaps count what committed moves already
    force (both only grow as routes are extended).
    """
    lbs = state.lb
    cn, on = state.crossings_and_overlaps()
    ms = max(lbs, default=0)
    rl = sum(lbs)
    return ObjectiveVector(_int(ms), _int(rl), cn, on)


def _int(x):
    return x if x == INF else int(x)


# ------------------------------------------------------------------ search


class _Search:
    def __init__(self, s: Scenario, cfg: SolverConfig, on_incumbent: Callable | None = None, shared=None,
                 prefix: dict[int, int] | None = None):
        self.s = s
        self.prefix = prefix or {}  # tasks pinned to a vehicle (parallel subtrees)
        self.cfg = cfg
        self.vehicles = sorted(s.vehicles)
        self.tasks = sorted(s.tasks)
        self.on_incumbent = on_incumbent
        self.shared = shared
        self.best: tuple | None = None
        self.best_solution: Solution | None = None
        self.stats = SolveStats()
        self.start = time.perf_counter()
        self.deadline = None if cfg.budget_ms is None else self.start + cfg.budget_ms / 1000.0
        self.exhausted = True
        # staged mode: compare only the first ``depth`` components, with the
        # earlier components capped by ``caps``
        self.depth = 4
        self.caps: tuple = ()
        self._set_cache: dict = {}

    # -- comparisons ---------------------------------------------------------

    def _key(self, vec) -> tuple:
        return tuple(vec[: self.depth])

    def _capped(self, vec) -> bool:
        return any(vec[i] > cap for i, cap in enumerate(self.caps))

    def _prefix_verdict(self, ms, rl) -> str:
        """'prune', 'keep', or 'tie' (crossings/overlaps decide) for bound (ms, rl)."""
        caps = self.caps
        if caps and (ms > caps[0] or (len(caps) > 1 and rl > caps[1])):
            return "prune"
        best = self.best
        if best is None:
            return "keep"
        if self.depth == 1:
            return "prune" if ms >= best[0] else "keep"
        if (ms, rl) != best[:2]:
            return "prune" if (ms, rl) > best[:2] else "keep"
        return "prune" if self.depth == 2 else "tie"

    def _tail_dominated(self, ms, rl, state: SearchState) -> bool:
        cn, on = state.crossings_and_overlaps()
        vec = (ms, rl, cn, on)
        return self._capped(vec) or self._key(vec) >= self._key(self.best)

    # -- budget --------------------------------------------------------------

    def _tick(self):
        st = self.stats
        st.nodes_expanded += 1
        if st.nodes_expanded & 255 == 0:
            if self.deadline is not None and time.perf_counter() > self.deadline:
                raise _BudgetExhausted
            if self.shared is not None:
                self._pull_shared()

    def _pull_shared(self):
        vec = tuple(self.shared[:4])
        if vec[0] >= 0 and (self.best is None or vec < self.best):
            self.best = vec

    # -- assignment level ----------------------------------------------------

    def _vehicle_set_bound(self, c: int, tasks: tuple) -> float | None:
        """Least duration for vehicle ``c`` to serve ``tasks`` in some order
        meeting all deadlines (ignoring other vehicles); None if impossible."""
        key = (c, tasks)
        if key in self._set_cache:
            return self._set_cache[key]
        start = self.s.vehicles[c]
        if not tasks:
            val = 0
        elif len(tasks) <= PERMUTATION_LIMIT:
            val = None
            for perm in permutations(tasks):
                tab = self._table(perm)
                if tab.latest[0][start] >= 0 and (val is None or tab.rest[0][start] < val):
                    val = tab.rest[0][start]
        else:
            singles = []
            for t in tasks:
                tab = self._table((t,))
                if tab.latest[0][start] < 0:
                    singles = None
                    break
                singles.append(tab.rest[0][start])
            halts = sum(self.s.halts[v] for t in tasks for v in self.s.tasks[t].subtasks)
            val = None if singles is None else max(max(singles), halts)
        self._set_cache[key] = val
        return val

    def _table(self, perm: tuple) -> ChainTable:
        key = ("table", perm)
        tab = self._set_cache.get(key)
        if tab is None:
            locs = [v for t in perm for v in self.s.tasks[t].subtasks]
            dls = [self.s.tasks[t].deadline for t in perm for _ in self.s.tasks[t].subtasks]
            tab = chain_table(self.s, locs, dls)
            self._set_cache[key] = tab
        return tab

    def _assignment_bound(self, per_vehicle: dict[int, list[int]]):
        lbs = []
        for c in self.vehicles:
            b = self._vehicle_set_bound(c, tuple(per_vehicle[c]))
            if b is None or b == INF:
                return None
            lbs.append(b)
        return max(lbs, default=0), sum(lbs)

    def run(self):
        if self.tasks and not self.vehicles:
            return
        per_vehicle = {c: [] for c in self.vehicles}
        self._assign(0, {}, per_vehicle)

    def _assign(self, idx: int, assignment: dict, per_vehicle: dict):
        if idx == len(self.tasks):
            self._orders(assignment, per_vehicle)
            return
        t = self.tasks[idx]
        children = []
        for c in self.vehicles:
            if t in self.prefix and self.prefix[t] != c:
                continue
            per_vehicle[c].append(t)
            b = self._assignment_bound(per_vehicle)
            per_vehicle[c].pop()
            if b is not None:
                children.append((b, c))
        children.sort()
        for (ms, rl), c in children:
            self._tick()
            if self._prefix_verdict(ms, rl) == "prune":
                continue
            assignment[t] = c
            per_vehicle[c].append(t)
            self._assign(idx + 1, assignment, per_vehicle)
            per_vehicle[c].pop()
            del assignment[t]

    def _orders(self, assignment: dict, per_vehicle: dict):
        options = []
        for c in self.vehicles:
            start = self.s.vehicles[c]
            perms = []
            for perm in permutations(per_vehicle[c]):
                tab = self._table(perm)
                if tab.latest[0][start] >= 0:
                    perms.append((tab.rest[0][start], perm))
            if not perms:
                return
            perms.sort()
            options.append(perms)
        combos = []
        for combo in product(*options):
            lbs = [lb for lb, _ in combo]
            combos.append(((max(lbs, default=0), sum(lbs)), [p for _, p in combo]))
        combos.sort(key=lambda x: x[0])
        for (ms, rl), perms in combos:
            self._tick()
            if self._prefix_verdict(ms, rl) == "prune":
                continue
            order = dict(zip(self.vehicles, perms))
            state = SearchState(self.s, order)
            self._route(state, assignment)

    # -- route level ---------------------------------------------------------

    def _route(self, state: SearchState, assignment: dict):
        self._tick()
        i = state.next_vehicle()
        if i is None:
            self._leaf(state, assignment)
            return
        s = self.s
        tab = state.tables[i]
        k = state.pending[i]
        here = state.node[i]
        now = state.time[i]
        me = i + 1
        m = len(state.locs[i])
        children = []
        for w in s.successors[here]:
            end = now + s.edges[(here, w)]
            if end > tab.latest[k][w]:
                continue
            if not state.node_free(w, end, end, me) or not state.edge_free(here, w, now + 1, end, me):
                continue
            children.append((end + tab.rest[k][w], 0, w, Move(here, w), end, k))
        if here == state.locs[i][k]:
            end = now + s.halts[here]
            ok = end <= tab.deadlines[k] and (k + 1 == m or end <= tab.latest[k + 1][here])
            if ok and state.node_free(here, now + 1, end, me):
                children.append((end + tab.rest[k + 1][here], 1, here, Stop(here), end, k + 1))
        if here in s.parks:
            end = now + s.parks[here]
            if end <= tab.latest[k][here] and state.node_free(here, now + 1, end, me):
                children.append((end + tab.rest[k][here], 2, here, Stop(here), end, k))
        children.sort(key=lambda c: c[:3])
        lbs = state.lb
        for new_lb, _, _, element, end, new_k in children:
            old = lbs[i]
            lbs[i] = new_lb
            ms = max(lbs)
            rl = sum(lbs)
            lbs[i] = old
            verdict = self._prefix_verdict(ms, rl)
            if verdict == "prune":
                continue
            rec = state.push(i, element, end, new_k, new_lb)
            if verdict == "keep" or not self._tail_dominated(ms, rl, state):
                self._route(state, assignment)
            state.pop(rec)

    def _leaf(self, state: SearchState, assignment: dict):
        cn, on = state.crossings_and_overlaps()
        ms = max(state.lb, default=0)
        rl = sum(state.lb)
        vec = ObjectiveVector(int(ms), int(rl), cn, on)
        if self._capped(vec):
            return
        if self.best is not None and self._key(vec) >= self._key(self.best):
            return
        self.best = tuple(vec)
        self.best_solution = state.solution(assignment)
        elapsed = (time.perf_counter() - self.start) * 1000
        self.stats.incumbents.append((elapsed, vec))
        log.debug("incumbent %s after %.0f ms, %d nodes", vec, elapsed, self.stats.nodes_expanded)
        if self.shared is not None:
            self._push_shared(vec)
        if self.on_incumbent is not None:
            self.on_incumbent(vec, elapsed, self.stats.nodes_expanded)
        if self.cfg.stops_at_first():
            raise _FirstSolution

    def _push_shared(self, vec):
        with self.shared.get_lock():
            cur = tuple(self.shared[:4])
            if cur[0] < 0 or tuple(vec) < cur:
                self.shared[:4] = list(vec)


def _search_once(search: _Search) -> bool:
    """Run one complete pass; True when the space was exhausted."""
    try:
        search.run()
    except _BudgetExhausted:
        return False
    except _FirstSolution:
        return False
    return True


def solve(s: Scenario, cfg: SolverConfig = SolverConfig(), on_incumbent: Callable | None = None) -> SolveOutcome:
    """Lexicographically optimal plan, or the best found within the budget."""
    if cfg.workers > 1 and len(s.tasks) > 0 and cfg.stage_mode == "vector":
        from .parallel import solve_parallel

        return solve_parallel(s, cfg, on_incumbent)
    search = _Search(s, cfg, on_incumbent)
    if cfg.stage_mode == "staged":
        complete = _staged(search)
    else:
        complete = _search_once(search)
    return _outcome(search, complete)


def _staged(search: _Search) -> bool:
    caps: list = []
    best_solution = None
    incumbents = []
    for depth in range(1, 5):
        search.depth = depth
        search.caps = tuple(caps)
        search.best = None
        search.best_solution = None
        complete = _search_once(search)
        incumbents.extend(search.stats.incumbents)
        search.stats.incumbents = []
        if search.best is None:
            search.best_solution = best_solution
            search.stats.incumbents = incumbents
            return complete
        best_solution = search.best_solution
        if not complete:
            break
        caps.append(search.best[depth - 1])
    search.stats.incumbents = incumbents
    search.best_solution = best_solution
    search.depth, search.caps = 4, ()
    return complete


def _outcome(search: _Search, complete: bool) -> SolveOutcome:
    from .validation import objectives

    st = search.stats
    st.elapsed_ms = (time.perf_counter() - search.start) * 1000
    st.proven_optimal = complete and search.best_solution is not None
    if search.best_solution is None:
        status = "infeasible" if complete else "budget_exhausted_no_solution"
        return SolveOutcome(status, None, None, st)
    obj = objectives(search.s, search.best_solution)
    return SolveOutcome("optimal" if complete else "feasible", search.best_solution, obj, st)


def initial_state(s: Scenario, assignment: dict[int, int], order: dict[int, Sequence[int]] | None = None) -> SearchState:
    """Root route-search state for a fixed assignment (tasks in id order per
    vehicle unless ``order`` is given)."""
    if order is None:
        order = {c: tuple(t for t in sorted(assignment) if assignment[t] == c) for c in s.vehicles}
    return SearchState(s, {c: tuple(order.get(c, ())) for c in s.vehicles})
