"""Shortest-time opening schedules over the station-set graph.

Finding the fastest investment plan is a shortest path problem: nodes are
open-station sets, an arc opens exactly one more station, and the arc weight
is the time the current state's profit stream needs to fund the next
acquisition. This module provides the best-first search (a zero heuristic
gives Dijkstra), admissible lower-bound heuristics built from per-level
profit caps, two fast inadmissible heuristics and their blend, weighted
search with a bounded-suboptimality guarantee, and a permutation
enumeration oracle used for verification.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NoScheduleError
from .instances import Instance
from .model import (
    EvaluationCache,
    ProfitBoundTable,
    StateEvaluation,
    evaluate_state,
    open_stations,
    transition_time,
)

_VARIANTS = ("zero", "eh1", "eh2", "eh3", "ah1", "ah2", "weighted")
_NEEDS_BOUNDS = ("eh1", "eh2", "eh3", "ah2", "weighted")


@dataclass(frozen=True)
class HeuristicKind:
    """Which cost-to-go estimate guides the search.

    zero is plain Dijkstra. eh1, eh2 and eh3 are admissible lower bounds, so
    the search result is optimal. ah1 overestimates and ah2 blends it with
    eh1 by the factor gamma; both trade optimality for speed. weighted runs
    an admissible base (eh2 or eh3) scaled by weight >= 1, bounding the
    result within that factor of optimal.
    """

    variant: str
    gamma: float = 0.5
    weight: float = 1.0
    base: str = "eh2"

    def __post_init__(self) -> None:
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown heuristic variant {self.variant!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.weight < 1.0:
            raise ValueError("weight must be at least 1")
        if self.base not in ("eh2", "eh3"):
            raise ValueError("weighted search must build on eh2 or eh3")

    @property
    def exact(self) -> bool:
        """True when the search outcome is guaranteed optimal."""
        return self.variant in ("zero", "eh1", "eh2", "eh3")

    @property
    def needs_bounds(self) -> bool:
        return self.variant in _NEEDS_BOUNDS


@dataclass(frozen=True)
class ScheduleStep:
    """One state along the plan: which station just opened and at what cost."""

    state: int
    opened: int | None
    arrival: float
    fleet: float
    acquisition_cost: float


@dataclass(frozen=True)
class SearchStats:
    """Search effort counters: extractions, live queue at the end, LP solves."""

    expanded: int
    remaining: int
    evaluations: int
    wall_ms: float


@dataclass(frozen=True)
class SearchResult:
    optimal_time: float
    schedule: tuple[ScheduleStep, ...]
    stats: SearchStats


@dataclass(frozen=True)
class DeltaLbContext:
    """Per-candidate acquisition data for the stepwise cost lower bound.

    For every station o closed at the base state: the cost of opening o
    right away (station setup plus vehicles for the demand-pinned traffic
    between o and the base set), and the extra traffic toward each other
    closed station j, sorted ascending. Occupied flows equal demand over
    return rate regardless of the state, so everything here comes straight
    from the instance and stays valid along any opening order.
    """

    base_mask: int
    num_stations: int
    vehicle_cost: float
    constants: dict[int, float]
    stations: dict[int, np.ndarray]
    entries: dict[int, np.ndarray]
    prefix: dict[int, np.ndarray]

    def bound(self, o: int, t: int) -> float:
        """Least acquisition outlay for opening o after t interim openings."""
        return self.constants[o] + self.vehicle_cost * self.prefix[o][t]


def build_delta_context(instance: Instance, mask: int) -> DeltaLbContext:
    """Sorted opening-cost data for every station closed at the given state."""
    r = instance.num_stations
    pinned = np.zeros((r, r))
    off = ~np.eye(r, dtype=bool)
    np.divide(instance.arrival_rate, instance.return_rate, out=pinned, where=off)
    traffic = pinned + pinned.T
    cp = instance.vehicle_cost
    open_idx = list(open_stations(mask))
    constants: dict[int, float] = {}
    stations: dict[int, np.ndarray] = {}
    entries: dict[int, np.ndarray] = {}
    prefix: dict[int, np.ndarray] = {}
    for o in range(r):
        if mask & (1 << o):
            continue
        constants[o] = float(instance.station_cost[o]
                             + cp * traffic[o, open_idx].sum())
        others = np.array([j for j in range(r)
                           if j != o and not mask & (1 << j)], dtype=np.intp)
        vals = traffic[o, others]
        order = np.argsort(vals, kind="stable")
        stations[o] = others[order]
        entries[o] = vals[order]
        prefix[o] = np.concatenate([[0.0], np.cumsum(entries[o])])
    return DeltaLbContext(mask, r, cp, constants, stations, entries, prefix)


def _positive_level(bounds: ProfitBoundTable, m: int) -> float:
    value = bounds.level(m)
    if not value > 0.0:
        raise ConfigurationError(f"profit bound at level {m} is not positive")
    return value


def h_eh1(evaluation: StateEvaluation, bounds: ProfitBoundTable,
          cost_final: float, num_stations: int) -> float:
    """Remaining acquisition gap funded at the best next-to-last profit rate."""
    top = _positive_level(bounds, num_stations - 1)
    return max(0.0, (cost_final - evaluation.acquisition_cost) / top)


def h_ah1(evaluation: StateEvaluation, cost_final: float) -> float:
    """Remaining acquisition gap funded at the state's own profit rate."""
    if not evaluation.profit > 0.0:
        raise ConfigurationError("this estimate needs a profitable state")
    return max(0.0, (cost_final - evaluation.acquisition_cost) / evaluation.profit)


def h_ah2(evaluation: StateEvaluation, gamma: float, bounds: ProfitBoundTable,
          cost_final: float, num_stations: int) -> float:
    """Blend of the optimistic and pessimistic single-rate estimates."""
    return (gamma * h_eh1(evaluation, bounds, cost_final, num_stations)
            + (1.0 - gamma) * h_ah1(evaluation, cost_final))


def h_eh2(context: DeltaLbContext, evaluation: StateEvaluation,
          bounds: ProfitBoundTable, cost_final: float) -> float:
    """Stepwise lower bound on the remaining time from the context's state.

    Each remaining opening is charged its least possible acquisition outlay
    at the best profit any state of that size can reach; whatever part of
    the total acquisition gap those outlays miss is charged at the top
    rate. Requires the context to be built at the evaluated state.
    """
    r = context.num_stations
    closed = sorted(context.constants)
    steps = len(closed)
    if steps == 0:
        return 0.0
    size_now = r - steps
    total = 0.0
    value = 0.0
    for i in range(1, steps + 1):
        delta = min(context.bound(o, i - 1) for o in closed)
        value += delta / _positive_level(bounds, size_now + i - 1)
        total += delta
    rest = cost_final - evaluation.acquisition_cost - total
    if rest > 0.0:
        value += rest / _positive_level(bounds, r - 1)
    return value


def h_eh3(context: DeltaLbContext, mask: int, evaluation: StateEvaluation,
          bounds: ProfitBoundTable, cost_final: float) -> float:
    """Stepwise lower bound reusing a context built once at the search start.

    Walks each candidate's presorted traffic entries: a state of size m has
    m minus the context size openings beyond the context's, so the first
    that-many positions are charged, skipping (while still counting) the
    positions of stations that have opened since. The skipped entries only
    lower the charge, so the bound stays below the one rebuilt on the spot.
    """
    r = context.num_stations
    closed = [o for o in range(r) if not mask & (1 << o)]
    steps = len(closed)
    if steps == 0:
        return 0.0
    size_now = r - steps
    size_base = r - len(context.constants)
    depth = size_now - size_base
    cums: dict[int, np.ndarray] = {}
    for o in closed:
        st = context.stations[o]
        en = context.entries[o]
        cum = np.empty(en.size + 1)
        cum[0] = 0.0
        run = 0.0
        for p in range(en.size):
            if not mask & (1 << int(st[p])):
                run += en[p]
            cum[p + 1] = run
        cums[o] = cum
    total = 0.0
    value = 0.0
    for i in range(1, steps + 1):
        t = depth + i - 1
        delta = min(context.constants[o] + context.vehicle_cost * cums[o][t]
                    for o in closed)
        value += delta / _positive_level(bounds, size_now + i - 1)
        total += delta
    rest = cost_final - evaluation.acquisition_cost - total
    if rest > 0.0:
        value += rest / _positive_level(bounds, r - 1)
    return value


def successors(instance: Instance, mask: int,
               cache: EvaluationCache) -> list[tuple[int, float]]:
    """Candidate arcs from one state: each closed station, with its funding time.

    Targets that cannot operate at a profit are dropped unless they are the
    all-open goal, which the plan may always finish on.
    """
    r = instance.num_stations
    goal = (1 << r) - 1
    if mask == goal:
        return []
    ev_s = evaluate_state(instance, mask, cache)
    if ev_s.status != "ok":
        return []
    out = []
    for o in range(r):
        if mask & (1 << o):
            continue
        t = mask | (1 << o)
        ev_t = evaluate_state(instance, t, cache)
        if ev_t.status == "infeasible":
            continue
        if ev_t.status == "nonpositive_profit" and t != goal:
            continue
        out.append((t, transition_time(instance, mask, t, cache)))
    return out


def astar(instance: Instance, start: int, kind: HeuristicKind,
          cache: EvaluationCache | None = None,
          bounds: ProfitBoundTable | None = None) -> SearchResult:
    """Best-first schedule search from one start state.

    Guided by f = g + w*h with w = 1 except for weighted kinds. Nodes are
    re-opened whenever a cheaper arrival is found, so admissible heuristics
    yield optimal plans even without consistency. Ties break toward larger
    arrival time, then insertion order, keeping runs deterministic.
    """
    t_begin = time.perf_counter()
    if cache is None:
        cache = EvaluationCache()
    if kind.needs_bounds and bounds is None:
        raise ConfigurationError(
            f"heuristic {kind.variant!r} needs a profit bound table")
    r = instance.num_stations
    goal = (1 << r) - 1
    solves_before = cache.solves
    weight = kind.weight if kind.variant == "weighted" else 1.0
    effective = kind.base if kind.variant == "weighted" else kind.variant
    cost_final = evaluate_state(instance, goal, cache).acquisition_cost
    ctx0 = build_delta_context(instance, start) if effective == "eh3" else None

    h_cache: dict[int, float] = {}

    def h_value(mask: int, evaluation: StateEvaluation) -> float:
        if mask == goal:
            return 0.0
        got = h_cache.get(mask)
        if got is not None:
            return got
        if effective == "zero":
            value = 0.0
        elif effective == "eh1":
            value = h_eh1(evaluation, bounds, cost_final, r)
        elif effective == "ah1":
            value = h_ah1(evaluation, cost_final)
        elif effective == "ah2":
            value = h_ah2(evaluation, kind.gamma, bounds, cost_final, r)
        elif effective == "eh2":
            ctx = build_delta_context(instance, mask)
            value = h_eh2(ctx, evaluation, bounds, cost_final)
        else:
            value = h_eh3(ctx0, mask, evaluation, bounds, cost_final)
        h_cache[mask] = value
        return value

    start_ev = evaluate_state(instance, start, cache)
    g_best: dict[int, float] = {start: 0.0}
    parent: dict[int, int | None] = {start: None}
    closed_g: dict[int, float] = {}
    counter = 0
    heap: list[tuple[float, float, int, int]] = [
        (weight * h_value(start, start_ev), 0.0, 0, start)]
    expanded = 0
    optimal: float | None = None

    while heap:
        _, neg_g, _, mask = heapq.heappop(heap)
        g = -neg_g
        if g > g_best.get(mask, np.inf) + 1e-15:
            continue
        previous = closed_g.get(mask)
        if previous is not None and previous <= g:
            continue
        closed_g[mask] = g
        expanded += 1
        if mask == goal:
            optimal = g
            break
        for t, tau in successors(instance, mask, cache):
            g_t = g + tau
            if g_t < g_best.get(t, np.inf) - 1e-15:
                g_best[t] = g_t
                parent[t] = mask
                counter += 1
                ev_t = evaluate_state(instance, t, cache)
                heapq.heappush(
                    heap, (g_t + weight * h_value(t, ev_t), -g_t, counter, t))

    if optimal is None:
        raise NoScheduleError(
            "every path to the all-open state dies at a loss-making state")

    remaining = 0
    for _, neg_g, _, mask in heap:
        g = -neg_g
        if g > g_best.get(mask, np.inf) + 1e-15:
            continue
        previous = closed_g.get(mask)
        if previous is not None and previous <= g:
            continue
        remaining += 1

    chain = []
    node: int | None = goal
    while node is not None:
        chain.append(node)
        node = parent[node]
    chain.reverse()
    steps = []
    for i, mask in enumerate(chain):
        ev = evaluate_state(instance, mask, cache)
        opened = None
        if i:
            opened = int(mask ^ chain[i - 1]).bit_length() - 1
        steps.append(ScheduleStep(mask, opened, g_best[mask], ev.fleet,
                                  ev.acquisition_cost))
    stats = SearchStats(expanded, remaining, cache.solves - solves_before,
                        (time.perf_counter() - t_begin) * 1e3)
    return SearchResult(optimal, tuple(steps), stats)


def oracle_enumerate(instance: Instance, start: int,
                     cache: EvaluationCache | None = None) -> float:
    """Exact minimum total time by trying every station-opening order.

    Refuses more than nine closed stations; meant for verifying the search
    on small cases, not for production use.
    """
    if cache is None:
        cache = EvaluationCache()
    r = instance.num_stations
    goal = (1 << r) - 1
    closed = [o for o in range(r) if not start & (1 << o)]
    if len(closed) > 9:
        raise ValueError(
            f"{len(closed)} closed stations exceed the enumeration guard of 9")
    best = np.inf

    def walk(mask: int, elapsed: float) -> None:
        nonlocal best
        if elapsed >= best:
            return
        if mask == goal:
            best = elapsed
            return
        for o in closed:
            bit = 1 << o
            if mask & bit:
                continue
            t = mask | bit
            ev_t = evaluate_state(instance, t, cache)
            if ev_t.status == "infeasible":
                continue
            if ev_t.status == "nonpositive_profit" and t != goal:
                continue
            walk(t, elapsed + transition_time(instance, mask, t, cache))

    start_ev = evaluate_state(instance, start, cache)
    if start == goal:
        return 0.0
    if start_ev.status == "ok":
        walk(start, 0.0)
    if not np.isfinite(best):
        raise NoScheduleError(
            "no opening order keeps every intermediate state profitable")
    return float(best)


def format_schedule(result: SearchResult) -> str:
    """Human-readable step table for one search result."""
    lines = [f"total time: {result.optimal_time:.6f} hours",
             "step  opened  arrival_hours        fleet   acq_cost  open set"]
    for i, step in enumerate(result.schedule):
        opened = "-" if step.opened is None else str(step.opened)
        members = ",".join(str(s) for s in open_stations(step.state))
        lines.append(f"{i:>4}  {opened:>6}  {step.arrival:>13.4f}  "
                     f"{step.fleet:>11.4f}  {step.acquisition_cost:>9.2f}  {{{members}}}")
    return "\n".join(lines)
