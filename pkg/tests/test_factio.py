import json

import pytest
from hypothesis import given, settings

from agvroute.factio import (
    ArityMismatch,
    FactSyntaxError,
    InconsistentDerivedFact,
    IncompleteDeclaration,
    SchemaError,
    UnknownId,
    UnknownPredicate,
    emit_atoms,
    emit_facts,
    emit_solution,
    parse_fact_list,
    parse_facts,
    parse_scenario_json,
    parse_solution,
    parse_solution_document,
    scenario_document,
)
from agvroute.model import HaltParkOverlap, ObjectiveVector, Solution, Stop, build_scenario
from agvroute.validation import InfeasibleSolution

from .conftest import scenarios

MINI = """
node(v(1..3)).
halt(v(3),2).
edge(v(1),v(2),1). edge(v(2),v(3),1).
task(t(1),9). subtask(t(1),s(1),v(3)).
vehicle(c(1),v(1)).
"""


def test_parse_example1_plain_facts(ex1):
    # the same instance written without shorthands or derived predicates
    lines = [f"node(v({v}))." for v in range(1, 8)]
    lines += [f"halt(v({v}),3)." for v in (2, 4, 5, 6)] + ["park(v(7),2)."]
    lines += [f"edge(v({a}),v({b}),{d})." for (a, b), d in ex1.edges.items()]
    lines += ["task(t(1),60).", "task(t(2),60)."]
    for t, subs in ((1, (5, 4, 2)), (2, (6, 4, 2))):
        lines += [f"subtask(t({t}),s({i}),v({v}))." for i, v in enumerate(subs, 1)]
    lines += ["vehicle(c(1),v(1)).", "vehicle(c(2),v(2))."]
    assert parse_facts("\n".join(lines)) == ex1


def test_shorthands_expand():
    facts = parse_fact_list("node(v(1..7)).")
    assert [f.args[0][1][0] for f in facts] == list(range(1, 8))
    pooled = parse_fact_list("halt(v(2;4),3).")
    assert sorted(f.args[0][1][0] for f in pooled) == [2, 4]
    both = parse_fact_list("subtask(t(1..2),s(1..3)).")
    assert len(both) == 6


def test_comments_ignored():
    s = parse_facts("% line comment\n%* block\ncomment *%\n" + MINI)
    assert s.tasks[1].subtasks == (3,)


def test_halt_park_overlap():
    with pytest.raises(HaltParkOverlap):
        parse_facts(MINI + "park(v(3),2).")


def test_syntax_error_location():
    with pytest.raises(FactSyntaxError) as err:
        parse_facts("node(v(1)).\nnode(v(2)\n")
    assert (err.value.line, err.value.column) == (3, 1)
    with pytest.raises(FactSyntaxError) as err:
        parse_facts("node(v(1)).\n  node(v(2)) # x\n")
    assert (err.value.line, err.value.column) == (2, 14)


def test_unknown_predicate_and_arity():
    with pytest.raises(UnknownPredicate):
        parse_facts(MINI + "robot(c(1)).")
    with pytest.raises(ArityMismatch):
        parse_facts(MINI + "edge(v(1),v(3)).")


def test_inconsistent_derived_facts():
    with pytest.raises(InconsistentDerivedFact):
        parse_facts(MINI + "stay(v(3),3).")
    with pytest.raises(InconsistentDerivedFact):
        parse_facts(MINI + "time(0..5).")
    # halt duration 1 gives no stay fact
    with pytest.raises(InconsistentDerivedFact):
        parse_facts(MINI.replace("halt(v(3),2)", "halt(v(3),1)") + "stay(v(3),1).")
    # consistent derived facts are accepted
    assert parse_facts(MINI + "stay(v(3),2). time(0..9).").tasks[1].deadline == 9


def test_task_without_deadline():
    with pytest.raises(IncompleteDeclaration):
        parse_facts(MINI + "subtask(t(2),s(1),v(3)).")


def test_emit_example1(ex1):
    text = emit_facts(ex1)
    assert "less(v(3),v(7),v(4))." in text
    assert "less(v(1),v(4),v(7))." in text
    assert "time(0..60)." in text
    for v in (2, 4, 5, 6):
        assert f"stay(v({v}),3)." in text
    assert "stay(v(7),2)." in text
    assert parse_facts(text) == ex1


@settings(max_examples=1000)
@given(scenarios())
def test_facts_round_trip(s):
    assert parse_facts(emit_facts(s)) == s


@given(scenarios())
def test_json_scenario_round_trip(s):
    assert parse_scenario_json(json.dumps(scenario_document(s))) == s


def test_solution_document(ex1, opt):
    obj = ObjectiveVector(55, 104, 3, 14)
    text = emit_solution(opt, obj, "optimal")
    doc = json.loads(text)
    assert len(doc["routes"]["c(1)"]) == 15
    assert len(doc["routes"]["c(2)"]) == 13
    assert doc["objectives"] == {"ms": 55, "rl": 104, "cn": 3, "on": 14}
    sol, obj2, status = parse_solution_document(text, ex1)
    assert sol == opt and obj2 == obj and status == "optimal"


def test_empty_solution_document(ex1):
    s = build_scenario(ex1.nodes, ex1.edges, ex1.halts, ex1.parks, {}, ex1.vehicles)
    empty = Solution.empty(s)
    doc = json.loads(emit_solution(empty, ObjectiveVector(0, 0, 0, 0), "optimal"))
    assert doc["routes"] == {"c(1)": [], "c(2)": []}
    assert doc["objectives"] == {"ms": 0, "rl": 0, "cn": 0, "on": 0}
    assert parse_solution(json.dumps(doc), s) == empty


def test_solution_unknown_ids(ex1, opt):
    doc = json.loads(emit_solution(opt, None, "feasible"))
    doc["routes"]["c(1)"][0] = {"move": ["v(2)", "v(1)"]}
    with pytest.raises(UnknownId):
        parse_solution(json.dumps(doc), ex1)
    doc = json.loads(emit_solution(opt, None, "feasible"))
    doc["assignment"]["t(3)"] = "c(1)"
    with pytest.raises(UnknownId):
        parse_solution(json.dumps(doc), ex1)
    with pytest.raises(SchemaError):
        parse_solution("[1, 2]", ex1)
    with pytest.raises(SchemaError):
        parse_solution('{"routes": {"c(1)": [{"jump": "v(1)"}]}}', ex1)


def test_emit_atoms(ex1, opt):
    atoms = emit_atoms(ex1, opt).splitlines()
    assert "at(c(1),v(2),55)." in atoms
    assert "at(c(2),v(2),49)." in atoms
    assert "move(c(1),v(1),v(7),0)." in atoms
    assert "assign(c(1),t(1))." in atoms and "assign(c(2),t(2))." in atoms
    assert "at(c(1),v(1),0)." in atoms


def test_emit_atoms_idle_vehicle(ex1):
    s = build_scenario(ex1.nodes, ex1.edges, ex1.halts, ex1.parks, {}, ex1.vehicles)
    atoms = emit_atoms(s, Solution.empty(s)).splitlines()
    assert atoms == ["at(c(1),v(1),0).", "at(c(2),v(2),0)."]


def test_emit_atoms_rejects_infeasible(ex1, opt):
    routes = dict(opt.routes)
    routes[1] = tuple(el for i, el in enumerate(routes[1]) if i != 1)  # drop the park stop
    with pytest.raises(InfeasibleSolution):
        emit_atoms(ex1, Solution(opt.assignment, opt.order, routes))


def test_stop_only_at_stoppable_nodes(ex1, opt):
    doc = json.loads(emit_solution(opt, None, "feasible"))
    doc["routes"]["c(1)"].append({"stop": "v(1)"})
    with pytest.raises(UnknownId):
        parse_solution(json.dumps(doc), ex1)
    assert Stop(7) in opt.routes[1]
