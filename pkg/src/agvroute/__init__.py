"""Optimal task assignment and collision-free routing for automated guided vehicles."""
from .model import (
    Move,
    ObjectiveVector,
    Scenario,
    Solution,
    Stop,
    Task,
    build_scenario,
    horizon,
)

__all__ = [
    "Move",
    "ObjectiveVector",
    "Scenario",
    "Solution",
    "Stop",
    "Task",
    "build_scenario",
    "horizon",
]
