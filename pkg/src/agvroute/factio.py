"""Fact-file (ASP ground facts) and JSON serialization.

Instances use the predicates node/1, halt/2, park/2, stay/2, edge/3, less/3,
time/1, task/1, task/2, tasks/2, subtask/2, subtask/3, vehicle/1 and
vehicle/2, with identifiers written as ``v(N)``, ``c(N)``, ``t(N)`` and
``s(N)``.  Ranges ``a..b`` and pools ``x;y`` are expanded on input.
"""
from __future__ import annotations

import json
import re
from collections import defaultdict
from itertools import product
from typing import Any, NamedTuple

from .model import (
    Move,
    ObjectiveVector,
    Scenario,
    ScenarioError,
    Solution,
    Stop,
    build_scenario,
    horizon,
    less_pairs,
)
from .validation import InfeasibleSolution, occupation_map, validate


class FactError(ValueError):
    pass


class FactSyntaxError(FactError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownPredicate(FactError):
    pass


class ArityMismatch(FactError):
    pass


class BadTerm(FactError):
    """An argument does not have the shape its predicate requires."""


class InconsistentDerivedFact(FactError):
    pass


class IncompleteDeclaration(FactError):
    """Declarations that cannot form a scenario (e.g. a task without deadline)."""


class SchemaError(ValueError):
    pass


class UnknownId(ValueError):
    pass


class Fact(NamedTuple):
    pred: str
    args: tuple
    line: int = 0
    column: int = 0


# ---------------------------------------------------------------- tokenizer

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<block>%\*.*?\*%)
  | (?P<comment>%[^\n]*)
  | (?P<range>\.\.)
  | (?P<int>\d+)
  | (?P<ident>[a-z_][A-Za-z0-9_']*)
  | (?P<punct>[(),;.\-])
    """,
    re.VERBOSE | re.DOTALL,
)


def _tokenize(text: str):
    pos = 0
    line, line_start = 1, 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FactSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        value = m.group()
        if kind not in ("ws", "comment", "block"):
            out.append((kind, value, line, pos - line_start + 1))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + value.rfind("\n") + 1
        pos = m.end()
    out.append(("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, value=None):
        tok = self.toks[self.i]
        if (kind and tok[0] != kind) or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            got = tok[1] or "end of input"
            raise FactSyntaxError(f"expected {want!r}, found {got!r}", tok[2], tok[3])
        self.i += 1
        return tok

    def statements(self) -> list[Fact]:
        facts = []
        while self.peek()[0] != "eof":
            _, name, line, col = self.take("ident")
            if self.peek()[1] == "(":
                self.take(value="(")
                alternatives = self.arglist()
                self.take(value=")")
            else:
                alternatives = [()]
            self.take(value=".")
            for args in alternatives:
                facts.append(Fact(name, args, line, col))
        return facts

    def arglist(self) -> list[tuple]:
        alternatives: list[tuple] = []
        while True:
            parts = [self.term()]
            while self.peek()[1] == ",":
                self.take()
                parts.append(self.term())
            alternatives.extend(product(*parts))
            if self.peek()[1] != ";":
                return alternatives
            self.take()

    def integer(self) -> int:
        sign = 1
        if self.peek()[1] == "-":
            self.take()
            sign = -1
        return sign * int(self.take("int")[1])

    def term(self) -> list:
        kind, value, line, col = self.peek()
        if kind == "int" or value == "-":
            lo = self.integer()
            if self.peek()[0] == "range":
                self.take()
                hi = self.integer()
                return list(range(lo, hi + 1))
            return [lo]
        if kind == "ident":
            self.take()
            if self.peek()[1] != "(":
                return [(value, ())]
            self.take()
            alternatives = self.arglist()
            self.take(value=")")
            return [(value, args) for args in alternatives]
        raise FactSyntaxError(f"unexpected {value or 'end of input'!r}", line, col)


def parse_fact_list(text: str) -> list[Fact]:
    """Parse ground facts, expanding ranges and pools."""
    return _Parser(text).statements()


# ---------------------------------------------------------------- schemas

# kind letters: v/c/t/s identifier wrapped in that function, i = integer
_SCHEMAS: dict[str, dict[int, str]] = {
    "node": {1: "v"},
    "halt": {2: "vi"},
    "park": {2: "vi"},
    "stay": {2: "vi"},
    "edge": {3: "vvi"},
    "less": {3: "vvv"},
    "time": {1: "i"},
    "task": {1: "t", 2: "ti"},
    "tasks": {2: "tt"},
    "subtask": {2: "ts", 3: "tsv"},
    "vehicle": {1: "c", 2: "cv"},
}


def _convert(fact: Fact) -> tuple:
    arities = _SCHEMAS.get(fact.pred)
    where = f"line {fact.line}, column {fact.column}"
    if arities is None:
        raise UnknownPredicate(f"{fact.pred}/{len(fact.args)} at {where}")
    shape = arities.get(len(fact.args))
    if shape is None:
        raise ArityMismatch(
            f"{fact.pred}/{len(fact.args)} at {where}; expected arity "
            + " or ".join(str(a) for a in sorted(arities))
        )
    out = []
    for kind, arg in zip(shape, fact.args):
        if kind == "i":
            if not isinstance(arg, int):
                raise BadTerm(f"{fact.pred} at {where}: expected an integer, got {_render(arg)}")
            out.append(arg)
        else:
            if not (isinstance(arg, tuple) and arg[0] == kind and len(arg[1]) == 1 and isinstance(arg[1][0], int)):
                raise BadTerm(f"{fact.pred} at {where}: expected {kind}(N), got {_render(arg)}")
            out.append(arg[1][0])
    return tuple(out)


def _render(term) -> str:
    if isinstance(term, int):
        return str(term)
    name, args = term
    return name if not args else f"{name}({','.join(_render(a) for a in args)})"


def parse_facts(text: str) -> Scenario:
    """Build a validated :class:`Scenario` from instance facts."""
    groups: dict[tuple[str, int], set[tuple]] = defaultdict(set)
    for fact in parse_fact_list(text):
        groups[(fact.pred, len(fact.args))].add(_convert(fact))

    nodes = {a[0] for a in groups[("node", 1)]}
    edges = sorted(groups[("edge", 3)])
    halts = sorted(groups[("halt", 2)])
    parks = sorted(groups[("park", 2)])
    deadlines: dict[int, int] = {}
    for t, d in sorted(groups[("task", 2)]):
        if t in deadlines:
            raise IncompleteDeclaration(f"task t({t}) has two deadlines")
        deadlines[t] = d
    subs: dict[int, dict[int, int]] = defaultdict(dict)
    for t, i, v in sorted(groups[("subtask", 3)]):
        if i in subs[t]:
            raise IncompleteDeclaration(f"subtask s({i}) of t({t}) declared twice")
        subs[t][i] = v
    tasks = {}
    for t in sorted(set(deadlines) | set(subs)):
        if t not in deadlines:
            raise IncompleteDeclaration(f"task t({t}) has no deadline")
        idx = sorted(subs.get(t, {}))
        if idx != list(range(1, len(idx) + 1)):
            raise IncompleteDeclaration(f"subtask indices of t({t}) are not 1..n: {idx}")
        tasks[t] = ([subs[t][i] for i in idx], deadlines[t])
    vehicles = sorted(groups[("vehicle", 2)])
    located = [c for c, _ in vehicles]
    if len(set(located)) != len(located):
        raise IncompleteDeclaration("a vehicle has two initial locations")

    scenario = build_scenario(nodes, edges, halts, parks, tasks, vehicles)

    expected = _derived(scenario)
    for key, facts in expected.items():
        present = groups.get(key)
        if present and present != facts:
            extra = sorted(present - facts)
            missing = sorted(facts - present)
            raise InconsistentDerivedFact(
                f"{key[0]}/{key[1]} facts disagree with the instance"
                f" (unexpected {extra[:3]}, missing {missing[:3]})"
            )
    return scenario


def _derived(s: Scenario) -> dict[tuple[str, int], set[tuple]]:
    stops = {**s.halts, **s.parks}
    return {
        ("stay", 2): {(v, d) for v, d in stops.items() if d > 1},
        ("less", 3): set(less_pairs(s)),
        ("time", 1): {(n,) for n in range(horizon(s) + 1)},
        ("task", 1): {(t,) for t in s.tasks},
        ("tasks", 2): {(t, u) for t in s.tasks for u in s.tasks if t != u},
        ("subtask", 2): {(t, i) for t, task in s.tasks.items() for i in range(1, len(task.subtasks) + 1)},
        ("vehicle", 1): {(c,) for c in s.vehicles},
    }


def emit_facts(s: Scenario) -> str:
    """Render ``s`` as facts, always including the derived predicates."""
    lines = [f"node(v({v}))." for v in sorted(s.nodes)]
    lines += [f"halt(v({v}),{d})." for v, d in sorted(s.halts.items())]
    lines += [f"park(v({v}),{d})." for v, d in sorted(s.parks.items())]
    stops = sorted({**s.halts, **s.parks}.items())
    lines += [f"stay(v({v}),{d})." for v, d in stops if d > 1]
    lines += [f"edge(v({a}),v({b}),{d})." for (a, b), d in sorted(s.edges.items())]
    lines += [f"less(v({a}),v({b}),v({v}))." for a, b, v in less_pairs(s)]
    lines.append(f"time(0..{horizon(s)}).")
    lines += [f"task(t({t}))." for t in sorted(s.tasks)]
    lines += [f"task(t({t}),{task.deadline})." for t, task in sorted(s.tasks.items())]
    lines += [f"tasks(t({t}),t({u}))." for t in sorted(s.tasks) for u in sorted(s.tasks) if t != u]
    for t, task in sorted(s.tasks.items()):
        lines += [f"subtask(t({t}),s({i}))." for i in range(1, len(task.subtasks) + 1)]
    for t, task in sorted(s.tasks.items()):
        lines += [f"subtask(t({t}),s({i}),v({v}))." for i, v in enumerate(task.subtasks, start=1)]
    lines += [f"vehicle(c({c}))." for c in sorted(s.vehicles)]
    lines += [f"vehicle(c({c}),v({v}))." for c, v in sorted(s.vehicles.items())]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- solutions

_ID = re.compile(r"^\s*([vct])\(\s*(-?\d+)\s*\)\s*$")


def _ident(text: Any, kind: str) -> int:
    if not isinstance(text, str):
        raise SchemaError(f"expected a {kind}(N) string, got {text!r}")
    m = _ID.match(text)
    if m is None or m.group(1) != kind:
        raise SchemaError(f"expected a {kind}(N) string, got {text!r}")
    return int(m.group(2))


def solution_document(sol: Solution | None, obj: ObjectiveVector | None, status: str) -> dict:
    if sol is None:
        return {"assignment": {}, "order": {}, "routes": {}, "objectives": None, "status": status}
    routes = {}
    for c in sorted(sol.routes):
        routes[f"c({c})"] = [
            {"move": [f"v({el.src})", f"v({el.dst})"]} if isinstance(el, Move) else {"stop": f"v({el.node})"}
            for el in sol.routes[c]
        ]
    return {
        "assignment": {f"t({t})": f"c({c})" for t, c in sorted(sol.assignment.items())},
        "order": {f"c({c})": [f"t({t})" for t in seq] for c, seq in sorted(sol.order.items())},
        "routes": routes,
        "objectives": obj._asdict() if obj is not None else None,
        "status": status,
    }


def emit_solution(sol: Solution | None, obj: ObjectiveVector | None, status: str) -> str:
    return json.dumps(solution_document(sol, obj, status), indent=2) + "\n"


STATUSES = ("optimal", "feasible", "infeasible", "budget_exhausted_no_solution")


def parse_solution_document(text: str, s: Scenario) -> tuple[Solution, ObjectiveVector | None, str]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("solution document must be a JSON object")
    for key in ("assignment", "order", "routes"):
        if not isinstance(doc.get(key, {}), dict):
            raise SchemaError(f"{key!r} must be an object")

    def vehicle(text):
        c = _ident(text, "c")
        if c not in s.vehicles:
            raise UnknownId(f"unknown vehicle {text}")
        return c

    def task(text):
        t = _ident(text, "t")
        if t not in s.tasks:
            raise UnknownId(f"unknown task {text}")
        return t

    assignment = {task(t): vehicle(c) for t, c in doc.get("assignment", {}).items()}
    order = {c: () for c in s.vehicles}
    for c, seq in doc.get("order", {}).items():
        if not isinstance(seq, list):
            raise SchemaError(f"order of {c} must be a list")
        order[vehicle(c)] = tuple(task(t) for t in seq)
    routes = {c: () for c in s.vehicles}
    for c, elements in doc.get("routes", {}).items():
        if not isinstance(elements, list):
            raise SchemaError(f"route of {c} must be a list")
        route = []
        for el in elements:
            if isinstance(el, dict) and set(el) == {"move"} and isinstance(el["move"], list) and len(el["move"]) == 2:
                a, b = (_ident(x, "v") for x in el["move"])
                if (a, b) not in s.edges:
                    raise UnknownId(f"route of {c} uses unknown connection ({a},{b})")
                route.append(Move(a, b))
            elif isinstance(el, dict) and set(el) == {"stop"}:
                v = _ident(el["stop"], "v")
                if v not in s.halts and v not in s.parks:
                    raise UnknownId(f"route of {c} stops at v({v}), which is neither halt nor park")
                route.append(Stop(v))
            else:
                raise SchemaError(f"bad route element {el!r}")
        routes[vehicle(c)] = tuple(route)

    obj = doc.get("objectives")
    if obj is not None:
        try:
            obj = ObjectiveVector(**{k: int(obj[k]) for k in ObjectiveVector._fields})
        except (KeyError, TypeError, ValueError):
            raise SchemaError(f"bad objectives {obj!r}") from None
    status = doc.get("status", "feasible")
    if status not in STATUSES:
        raise SchemaError(f"unknown status {status!r}")
    sol = Solution(dict(sorted(assignment.items())), dict(sorted(order.items())), dict(sorted(routes.items())))
    return sol, obj, status


def parse_solution(text: str, s: Scenario) -> Solution:
    return parse_solution_document(text, s)[0]


# ---------------------------------------------------------------- atoms


def emit_atoms(s: Scenario, sol: Solution) -> str:
    """assign/2, order/2, at/3 and move/4 atoms of a feasible solution."""
    report = validate(s, sol)
    if not report.feasible:
        raise InfeasibleSolution(report.conflicts)
    h = horizon(s)
    lines = [f"assign(c({c}),t({t}))." for t, c in sorted(sol.assignment.items())]
    for c in sorted(sol.order):
        seq = sol.order[c]
        lines += [f"order(t({a}),t({b}))." for i, a in enumerate(seq) for b in seq[i + 1:]]
    occ = occupation_map(s, sol)
    for c in sorted(occ):
        times = sorted((t, v) for v, ts in occ[c].nodes.items() for t in ts if t <= h)
        lines += [f"at(c({c}),v({v}),{t})." for t, v in times]
    for c in sorted(s.vehicles):
        prefix = 0
        for el in sol.routes.get(c, ()):
            d = s.duration(el)
            if isinstance(el, Move) and prefix + d <= h:
                lines.append(f"move(c({c}),v({el.src}),v({el.dst}),{prefix}).")
            prefix += d
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- scenario JSON


def scenario_document(s: Scenario) -> dict:
    return {
        "nodes": [f"v({v})" for v in sorted(s.nodes)],
        "edges": [[f"v({a})", f"v({b})", d] for (a, b), d in sorted(s.edges.items())],
        "halts": {f"v({v})": d for v, d in sorted(s.halts.items())},
        "parks": {f"v({v})": d for v, d in sorted(s.parks.items())},
        "tasks": {
            f"t({t})": {"subtasks": [f"v({v})" for v in task.subtasks], "deadline": task.deadline}
            for t, task in sorted(s.tasks.items())
        },
        "vehicles": {f"c({c})": f"v({v})" for c, v in sorted(s.vehicles.items())},
    }


def parse_scenario_json(text: str) -> Scenario:
    try:
        doc = json.loads(text)
        nodes = [_ident(v, "v") for v in doc["nodes"]]
        edges = [(_ident(a, "v"), _ident(b, "v"), d) for a, b, d in doc["edges"]]
        halts = [(_ident(v, "v"), d) for v, d in doc.get("halts", {}).items()]
        parks = [(_ident(v, "v"), d) for v, d in doc.get("parks", {}).items()]
        tasks = [
            (_ident(t, "t"), ([_ident(v, "v") for v in body["subtasks"]], body["deadline"]))
            for t, body in doc.get("tasks", {}).items()
        ]
        vehicles = [(_ident(c, "c"), _ident(v, "v")) for c, v in doc.get("vehicles", {}).items()]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise SchemaError(f"bad scenario document: {exc}") from None
    return build_scenario(nodes, edges, halts, parks, tasks, vehicles)
