from itertools import permutations, product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agvroute.genbench import generate
from agvroute.model import Move, ObjectiveVector, Solution, Stop, build_scenario, horizon
from agvroute.oracle import (
    Canonicalization,
    Infeasible,
    LimitReached,
    best_by_enumeration,
    enumerate_feasible,
    iter_feasible,
)
from agvroute.validation import objectives, validate

from .conftest import small_params

CONTINUE = Canonicalization(routes_end_at_last_completion=False)


def test_example1_counts(ex1, opt):
    res = enumerate_feasible(ex1)
    assert res.count == 255
    assert res.optimum == ObjectiveVector(55, 104, 3, 14)
    assert res.optima_count == 1
    assert res.witness == opt


def test_example1_continuation_closure(ex1):
    res = enumerate_feasible(ex1, CONTINUE)
    assert res.count == 561
    assert res.optimum == (55, 104, 3, 14) and res.optima_count == 1


def test_best_by_enumeration(ex1, opt):
    assert best_by_enumeration(ex1) == ((55, 104, 3, 14), 1, opt)


def test_zero_tasks(ex1):
    s = build_scenario(ex1.nodes, ex1.edges, ex1.halts, ex1.parks, {}, ex1.vehicles)
    obj, n, sol = best_by_enumeration(s)
    assert (obj, n, sol) == ((0, 0, 0, 0), 1, Solution.empty(s))


def test_tight_deadlines_infeasible(ex1):
    tasks = {t: (task.subtasks, 40) for t, task in ex1.tasks.items()}
    s = build_scenario(ex1.nodes, ex1.edges, ex1.halts, ex1.parks, tasks, ex1.vehicles)
    with pytest.raises(Infeasible):
        best_by_enumeration(s)


def test_unreachable_subtask():
    s = build_scenario([1, 2, 3], [(1, 2, 1)], halts={3: 1}, tasks={1: ([3], 20)}, vehicles={1: 1})
    assert enumerate_feasible(s).count == 0


def test_line_graph():
    s = build_scenario([1, 2, 3], [(1, 2, 1), (2, 3, 1)], halts={3: 1}, tasks={1: ([3], 50)}, vehicles={1: 1})
    res = enumerate_feasible(s)
    assert res.count == 1
    assert res.witness.routes[1] == (Move(1, 2), Move(2, 3), Stop(3))


def test_limit(ex1):
    with pytest.raises(LimitReached) as err:
        enumerate_feasible(ex1, limit=10)
    assert err.value.count == 10


def test_enumerated_solutions_valid_and_distinct(ex1):
    for canon in (Canonicalization(), CONTINUE):
        seen = set()
        for sol in iter_feasible(ex1, canon):
            assert validate(ex1, sol).feasible
            key = (tuple(sorted(sol.assignment.items())), tuple(sorted(sol.routes.items())))
            assert key not in seen
            seen.add(key)


# -- independent brute force: every element sequence, filtered by validate


def _all_routes(s, start, limit):
    out = [()]
    frontier = [((), start, 0)]
    while frontier:
        nxt = []
        for route, here, t in frontier:
            steps = [Move(here, w) for w in s.successors[here]]
            if here in s.halts or here in s.parks:
                steps.append(Stop(here))
            for el in steps:
                end = t + s.duration(el)
                if end <= limit:
                    r = route + (el,)
                    out.append(r)
                    nxt.append((r, el.dst if isinstance(el, Move) else here, end))
        frontier = nxt
    return out


def brute_force(s, canon):
    h = horizon(s)
    tasks, vehicles = sorted(s.tasks), sorted(s.vehicles)
    pool = {c: _all_routes(s, s.vehicles[c], h) for c in vehicles}
    found = []
    for choice in product(vehicles, repeat=len(tasks)):
        assignment = dict(zip(tasks, choice))
        mine = [[t for t in tasks if assignment[t] == c] for c in vehicles]
        for orders in product(*(permutations(ts) for ts in mine)):
            order = dict(zip(vehicles, orders))
            options = []
            for c in vehicles:
                if not order[c]:
                    opts = [()]
                elif canon.routes_end_at_last_completion:
                    opts = [r for r in pool[c] if r and isinstance(r[-1], Stop) and r[-1].node in s.halts]
                else:
                    opts = pool[c]
                options.append(opts)
            for routes in product(*options):
                sol = Solution(assignment, order, dict(zip(vehicles, routes)))
                if not validate(s, sol).feasible:
                    continue
                if canon.routes_end_at_last_completion:
                    # the final halt must be the last completion, not a stray halt
                    sched = validate(s, sol).schedule
                    if any(r and sched.halts[c][-1][0] != len(r) for c, r in zip(vehicles, routes)):
                        continue
                found.append(sol)
    return found


@st.composite
def tiny(draw):
    n = draw(st.integers(2, 4))
    nodes = list(range(1, n + 1))
    pairs = [(a, b) for a in nodes for b in nodes if a != b]
    edges = [(a, b, draw(st.integers(1, 3))) for a, b in draw(st.lists(st.sampled_from(pairs), unique=True, min_size=1))]
    roles = draw(st.lists(st.sampled_from("hhp"), min_size=n, max_size=n))
    halts = {v: draw(st.integers(1, 2)) for v, r in zip(nodes, roles) if r == "h"}
    parks = {v: draw(st.integers(1, 2)) for v, r in zip(nodes, roles) if r == "p"}
    if not halts:
        parks.pop(nodes[0], None)
        halts = {nodes[0]: 1}
    tasks = {}
    for t in range(1, draw(st.integers(1, 2)) + 1):
        subs = draw(st.lists(st.sampled_from(sorted(halts)), min_size=1, max_size=2))
        tasks[t] = (subs, draw(st.integers(2, 8)))
    k = draw(st.integers(1, 2))
    starts = draw(st.permutations(nodes))[:k]
    return build_scenario(nodes, edges, halts, parks, tasks, dict(enumerate(starts, 1)))


def _key(sol):
    return (tuple(sorted(sol.assignment.items())), tuple(sorted(sol.order.items())), tuple(sorted(sol.routes.items())))


@settings(max_examples=150)
@given(tiny(), st.booleans())
def test_oracle_matches_brute_force(s, cont):
    canon = CONTINUE if cont else Canonicalization()
    expected = sorted(map(_key, brute_force(s, canon)))
    got = sorted(map(_key, iter_feasible(s, canon)))
    assert got == expected


@pytest.mark.parametrize("seed", range(8))
def test_oracle_optimum_is_minimum_of_stream(seed):
    s = generate(small_params(seed))
    sols = list(iter_feasible(s))
    res = enumerate_feasible(s)
    assert res.count == len(sols)
    if sols:
        vecs = [objectives(s, x) for x in sols]
        assert res.optimum == min(vecs)
        assert res.optima_count == vecs.count(min(vecs))
