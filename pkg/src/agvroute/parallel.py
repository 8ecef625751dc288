"""Multi-process branch-and-bound over assignment subtrees.

The assignment of the first tasks is fixed per subtree; subtrees are handed to
a process pool one at a time, so idle workers pick up the next open subtree.
Workers share the incumbent vector through a small shared-memory array and
prune against it.  Proof of optimality needs every subtree to finish.
"""
from __future__ import annotations

import multiprocessing as mp
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import replace
from itertools import product
from typing import Callable

from .model import Scenario
from .optimizer import SolveOutcome, SolverConfig, _outcome, _Search, _search_once

PREFIX_TASKS = 2

_shared = None


def _init(shared):
    global _shared
    _shared = shared


def _run_subtree(s: Scenario, cfg: SolverConfig, prefix: dict, deadline: float | None):
    if deadline is not None:
        remaining = max(0, int((deadline - time.time()) * 1000))
        cfg = replace(cfg, budget_ms=remaining)
    search = _Search(s, cfg, shared=_shared, prefix=prefix)
    if search.shared is not None:
        search._pull_shared()
    complete = _search_once(search)
    best = search.best if search.best_solution is not None else None
    return complete, best, search.best_solution, search.stats.nodes_expanded, search.stats.incumbents


def subtrees(s: Scenario, depth: int = PREFIX_TASKS) -> list[dict[int, int]]:
    tasks = sorted(s.tasks)[:depth]
    vehicles = sorted(s.vehicles)
    return [dict(zip(tasks, combo)) for combo in product(vehicles, repeat=len(tasks))]


def solve_parallel(s: Scenario, cfg: SolverConfig, on_incumbent: Callable | None = None) -> SolveOutcome:
    start_wall = time.time()
    start = time.perf_counter()
    deadline = None if cfg.budget_ms is None else start_wall + cfg.budget_ms / 1000.0
    ctx = mp.get_context("spawn")
    shared = ctx.Array("q", [-1, -1, -1, -1])
    jobs = subtrees(s)

    best = None  # (vec, job index, solution)
    complete = True
    nodes = 0
    incumbents = []
    with ProcessPoolExecutor(max_workers=cfg.workers, mp_context=ctx, initializer=_init, initargs=(shared,)) as pool:
        futures = {pool.submit(_run_subtree, s, cfg, job, deadline): i for i, job in enumerate(jobs)}
        pending = set(futures)
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in done:
                done_ok, vec, sol, n, incs = fut.result()
                nodes += n
                complete = complete and done_ok
                offset = (time.perf_counter() - start) * 1000
                incumbents.extend((min(t, offset), v) for t, v in incs)
                if vec is None:
                    continue
                key = (tuple(vec), futures[fut])
                if best is None or key < best[:2]:
                    best = (key[0], key[1], sol)
                    if on_incumbent is not None:
                        on_incumbent(vec, offset, nodes)
            if best is not None and cfg.stops_at_first():
                for fut in pending:
                    fut.cancel()
                complete = False
                break

    search = _Search(s, cfg)
    search.start = start
    search.best_solution = best[2] if best else None
    stats = search.stats
    stats.nodes_expanded = nodes
    # keep only strict improvements, in time order
    incumbents.sort(key=lambda x: x[0])
    for t, v in incumbents:
        if not stats.incumbents or tuple(v) < tuple(stats.incumbents[-1][1]):
            stats.incumbents.append((t, v))
    return _outcome(search, complete)


__all__ = ["solve_parallel", "subtrees"]
