import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from agvroute.genbench import GenParams
from agvroute.instances import example1, example1_optimum
from agvroute.model import build_scenario

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def ex1():
    return example1()


@pytest.fixture
def opt():
    return example1_optimum()


def small_params(seed: int, **kw) -> GenParams:
    """Instances small enough for exhaustive enumeration."""
    base = dict(
        nodes=6, edges=9, halt_fraction=0.5, park_fraction=0.17, tasks=2, subtasks_min=1, subtasks_max=2,
        vehicles=2, slack=1.6, bidirectional_fraction=0.5, seed=seed, move_duration=(1, 3),
        halt_duration=(1, 2), park_duration=(1, 2),
    )
    base.update(kw)
    return GenParams(**base)


@st.composite
def scenarios(draw, max_nodes=7, max_tasks=3, max_vehicles=3):
    """Arbitrary valid scenarios (any digraph, not only generator layouts)."""
    n = draw(st.integers(2, max_nodes))
    ids = sorted(draw(st.sets(st.integers(1, 40), min_size=n, max_size=n)))
    pairs = [(a, b) for a in ids for b in ids if a != b]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    edges = [(a, b, draw(st.integers(1, 9))) for a, b in chosen]
    roles = draw(st.lists(st.sampled_from("hpn"), min_size=n, max_size=n))
    halts = {v: draw(st.integers(1, 5)) for v, r in zip(ids, roles) if r == "h"}
    parks = {v: draw(st.integers(1, 5)) for v, r in zip(ids, roles) if r == "p"}
    tasks = {}
    if halts:
        for t in range(1, draw(st.integers(0, max_tasks)) + 1):
            subs = draw(st.lists(st.sampled_from(sorted(halts)), min_size=1, max_size=4))
            tasks[t] = (subs, draw(st.integers(1, 80)))
    k = draw(st.integers(0, min(max_vehicles, n)))
    starts = draw(st.permutations(ids))[:k]
    vehicles = {c: v for c, v in enumerate(starts, start=1)}
    return build_scenario(ids, edges, halts, parks, tasks, vehicles)
