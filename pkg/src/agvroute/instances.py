"""Bundled instances."""
from __future__ import annotations

from importlib import resources

from .factio import parse_facts
from .model import Move, Scenario, Solution, Stop


def example1_text() -> str:
    return resources.files("agvroute").joinpath("data/example1.lp").read_text(encoding="utf-8")


def example1() -> Scenario:
    """Seven locations, two vehicles, two three-subtask tasks due at 60."""
    return parse_facts(example1_text())


def _route(*items) -> tuple:
    return tuple(Move(*x) if isinstance(x, tuple) else Stop(x) for x in items)


def example1_optimum() -> Solution:
    """The unique optimal plan of :func:`example1` (makespan 55)."""
    return Solution(
        assignment={1: 1, 2: 2},
        order={1: (1,), 2: (2,)},
        routes={
            1: _route((1, 7), 7, (7, 4), (4, 5), 5, (5, 6), (6, 1), (1, 2), (2, 3),
                      (3, 4), 4, (4, 7), (7, 1), (1, 2), 2),
            2: _route((2, 3), (3, 4), (4, 5), (5, 6), 6, (6, 1), (1, 7), (7, 4), 4,
                      (4, 7), (7, 1), (1, 2), 2),
        },
    )
