"""Schedule search against enumeration, true cost-to-go, and hand networks.

The admissibility checks compare against helpers.true_cost_to_go, an exact
backward induction over supersets that shares no code with either the
best-first search or the permutation oracle.
"""

from __future__ import annotations

import dataclasses
import itertools

import numpy as np
import pytest
from helpers import lattice_masks, true_cost_to_go

from fleetplan.errors import ConfigurationError, NoScheduleError
from fleetplan.instances import GenSpec, Instance, generate, parse_name
from fleetplan.model import (
    EvaluationCache,
    evaluate_state,
    initial_state,
    open_stations,
    profit_bounds,
    station_mask,
    transition_time,
)
from fleetplan.search import (
    HeuristicKind,
    build_delta_context,
    astar,
    format_schedule,
    h_ah1,
    h_ah2,
    h_eh1,
    h_eh2,
    h_eh3,
    oracle_enumerate,
    successors,
)

EXACT_KINDS = (HeuristicKind("zero"), HeuristicKind("eh1"),
               HeuristicKind("eh2"), HeuristicKind("eh3"))


def small_specs() -> list[GenSpec]:
    out = []
    for seed in (1, 2, 3):
        out.append(GenSpec("circular", 7, "BAL", seed))
        out.append(GenSpec("hexagonal", 7, "IMB", seed))
        out.append(GenSpec("quadratic", 9, "BAL", seed))
    return out


@pytest.fixture(scope="module")
def solved_pool():
    """Generated instances with their start state, bounds, and shared cache."""
    pool = []
    for spec in small_specs():
        inst = generate(spec)
        cache = EvaluationCache()
        start, _ = initial_state(inst, cache)
        bounds = profit_bounds(inst, m_min=len(open_stations(start)), cache=cache)
        pool.append((inst, start, bounds, cache))
    return pool


# ---------------------------------------------------------------- hand nets


def toxic_instance(num_stations: int) -> Instance:
    """Stations 0/1 earn well; every further station loses money.

    Stations beyond 1 receive demand they cannot profitably serve: zero
    margin and a heavy one-way imbalance that forces costly empty runs.
    """
    n = num_stations
    lam = np.zeros((n, n))
    lam[0, 1] = lam[1, 0] = 4.0
    mu = np.full((n, n), 1.0)
    margin = np.zeros((n, n))
    margin[0, 1] = margin[1, 0] = 10.0
    reb = np.full((n, n), 50.0)
    reb[0, 1] = reb[1, 0] = 0.1
    np.fill_diagonal(reb, 0.0)
    for extra in range(2, n):
        lam[0, extra] = 6.0
        lam[extra, 0] = 0.5
    coords = [[float(i), 0.0] for i in range(n)]
    return Instance(n, coords, lam, mu, margin, reb, [100.0] * n,
                    1.0, 0.5, 1.0e6, f"toxic-{n}", 0)


def test_toxic_goal_exemption_and_oracle_agree():
    inst = toxic_instance(3)
    cache = EvaluationCache()
    start = station_mask([0, 1])
    goal = station_mask([0, 1, 2])
    assert evaluate_state(inst, start, cache).status == "ok"
    assert evaluate_state(inst, goal, cache).status == "nonpositive_profit"
    succ = successors(inst, start, cache)
    assert [t for t, _ in succ] == [goal]
    result = astar(inst, start, HeuristicKind("zero"), cache)
    assert result.optimal_time == pytest.approx(
        transition_time(inst, start, goal, cache), rel=1e-12)
    assert result.optimal_time == pytest.approx(
        oracle_enumerate(inst, start, cache), rel=1e-12)
    assert result.schedule[-1].state == goal


def test_toxic_dead_end_raises():
    inst = toxic_instance(4)
    cache = EvaluationCache()
    start = station_mask([0, 1])
    for extra in (2, 3):
        ev = evaluate_state(inst, start | (1 << extra), cache)
        assert ev.status == "nonpositive_profit"
    assert successors(inst, start, cache) == []
    with pytest.raises(NoScheduleError):
        astar(inst, start, HeuristicKind("zero"), cache)
    with pytest.raises(NoScheduleError):
        oracle_enumerate(inst, start, cache)


# ------------------------------------------------------------- validation


def test_heuristic_kind_validation():
    assert HeuristicKind("eh2").exact
    assert not HeuristicKind("ah1").exact
    assert not HeuristicKind("weighted", weight=1.05).exact
    with pytest.raises(ValueError):
        HeuristicKind("dijkstra")
    with pytest.raises(ValueError):
        HeuristicKind("ah2", gamma=1.5)
    with pytest.raises(ValueError):
        HeuristicKind("weighted", weight=0.9)
    with pytest.raises(ValueError):
        HeuristicKind("weighted", base="eh1")


def test_bounds_required_for_lower_bound_kinds(solved_pool):
    inst, start, _, cache = solved_pool[0]
    with pytest.raises(ConfigurationError):
        astar(inst, start, HeuristicKind("eh2"), cache, bounds=None)


# -------------------------------------------------------- context / bounds


def test_delta_context_matches_exhaustive_enumeration(solved_pool):
    inst, start, _, _ = solved_pool[0]
    r = inst.num_stations
    pinned = np.zeros((r, r))
    off = ~np.eye(r, dtype=bool)
    np.divide(inst.arrival_rate, inst.return_rate, out=pinned, where=off)
    traffic = pinned + pinned.T
    ctx = build_delta_context(inst, start)
    opened = set(open_stations(start))
    closed = [o for o in range(r) if o not in opened]
    for o in closed:
        others = [j for j in closed if j != o]
        for t in range(len(others) + 1):
            best = min(
                inst.station_cost[o] + inst.vehicle_cost * sum(
                    traffic[o, j] for j in itertools.chain(opened, combo))
                for combo in itertools.combinations(others, t))
            assert ctx.bound(o, t) == pytest.approx(best, rel=1e-12)


def test_delta_context_candidates_are_only_closed_stations(solved_pool):
    inst, start, _, _ = solved_pool[0]
    ctx = build_delta_context(inst, start)
    assert set(ctx.constants) == set(range(inst.num_stations)) - set(
        open_stations(start))
    for o, arr in ctx.entries.items():
        assert np.all(np.diff(arr) >= 0.0)
        assert arr.size == len(ctx.constants) - 1


# ------------------------------------------------- agreement with the oracle


def test_exact_kinds_match_oracle(solved_pool):
    for inst, start, bounds, cache in solved_pool:
        want = oracle_enumerate(inst, start, cache)
        for kind in EXACT_KINDS:
            got = astar(inst, start, kind, cache, bounds).optimal_time
            assert got == pytest.approx(want, rel=1e-6), (inst.name, kind.variant)


def test_start_already_goal():
    inst = generate(GenSpec("circular", 7, "BAL", 1))
    goal = (1 << 7) - 1
    result = astar(inst, goal, HeuristicKind("zero"))
    assert result.optimal_time == 0.0
    assert result.stats.expanded == 1
    assert len(result.schedule) == 1
    assert oracle_enumerate(inst, goal) == 0.0


def test_oracle_guard_rejects_large_gap():
    inst = generate(GenSpec("quadratic", 16, "BAL", 1))
    with pytest.raises(ValueError):
        oracle_enumerate(inst, station_mask([0, 1]))


# ------------------------------------------- admissibility and dominance


def test_lower_bounds_never_exceed_true_cost(solved_pool):
    for inst, start, bounds, cache in solved_pool:
        remaining = true_cost_to_go(inst, start, cache)
        r = inst.num_stations
        goal = (1 << r) - 1
        ctx0 = build_delta_context(inst, start)
        cost_final = evaluate_state(inst, goal, cache).acquisition_cost
        for mask in lattice_masks(r, start):
            h_star = remaining[mask]
            if not np.isfinite(h_star):
                continue
            ev = evaluate_state(inst, mask, cache)
            if ev.status != "ok" and mask != goal:
                continue
            ctx = build_delta_context(inst, mask)
            e1 = h_eh1(ev, bounds, cost_final, r)
            e2 = h_eh2(ctx, ev, bounds, cost_final)
            e3 = h_eh3(ctx0, mask, ev, bounds, cost_final)
            slack = 1e-6 * max(1.0, h_star)
            assert e1 <= h_star + slack, (inst.name, mask)
            assert e2 <= h_star + slack, (inst.name, mask)
            assert e3 <= h_star + slack, (inst.name, mask)
            assert e2 >= e1 - 1e-9
            assert e3 <= e2 + 1e-9
        assert h_eh3(ctx0, start, evaluate_state(inst, start, cache), bounds,
                     cost_final) == pytest.approx(
            h_eh2(ctx0, evaluate_state(inst, start, cache), bounds,
                  cost_final), rel=1e-12)


def test_blend_interpolates_between_rates(solved_pool):
    inst, start, bounds, cache = solved_pool[0]
    r = inst.num_stations
    cost_final = evaluate_state(inst, (1 << r) - 1, cache).acquisition_cost
    ev = evaluate_state(inst, start, cache)
    lo = h_eh1(ev, bounds, cost_final, r)
    hi = h_ah1(ev, cost_final)
    assert h_ah2(ev, 1.0, bounds, cost_final, r) == pytest.approx(lo, rel=1e-12)
    assert h_ah2(ev, 0.0, bounds, cost_final, r) == pytest.approx(hi, rel=1e-12)
    mid = h_ah2(ev, 0.4, bounds, cost_final, r)
    assert min(lo, hi) - 1e-12 <= mid <= max(lo, hi) + 1e-12


def test_pessimistic_rate_needs_profit():
    inst = toxic_instance(3)
    ev = evaluate_state(inst, station_mask([0, 1, 2]))
    with pytest.raises(ConfigurationError):
        h_ah1(ev, 1.0e4)


# ----------------------------------------------------- inexact search modes


def test_weighted_search_respects_factor(solved_pool):
    for inst, start, bounds, cache in solved_pool[:4]:
        opt = astar(inst, start, HeuristicKind("eh2"), cache, bounds).optimal_time
        for base in ("eh2", "eh3"):
            for w in (1.05, 1.1):
                kind = HeuristicKind("weighted", weight=w, base=base)
                got = astar(inst, start, kind, cache, bounds).optimal_time
                assert opt - 1e-9 <= got <= w * opt * (1.0 + 1e-9)


def test_approximate_kinds_return_valid_schedules(solved_pool):
    inst, start, bounds, cache = solved_pool[0]
    opt = astar(inst, start, HeuristicKind("zero"), cache).optimal_time
    for kind in (HeuristicKind("ah1"), HeuristicKind("ah2", gamma=0.3),
                 HeuristicKind("ah2", gamma=0.7)):
        got = astar(inst, start, kind, cache, bounds).optimal_time
        assert got >= opt - 1e-9
    exact_blend = astar(inst, start, HeuristicKind("ah2", gamma=1.0),
                        cache, bounds).optimal_time
    assert exact_blend == pytest.approx(opt, rel=1e-6)


# ------------------------------------------------------ schedule structure


def test_schedules_are_consistent(solved_pool):
    for inst, start, bounds, cache in solved_pool[:3]:
        for kind in (HeuristicKind("zero"), HeuristicKind("eh2"),
                     HeuristicKind("ah2", gamma=0.5)):
            result = astar(inst, start, kind, cache, bounds)
            steps = result.schedule
            assert steps[0].state == start
            assert steps[0].arrival == 0.0
            assert steps[0].opened is None
            assert steps[-1].state == (1 << inst.num_stations) - 1
            assert steps[-1].arrival == pytest.approx(
                result.optimal_time, rel=1e-12)
            total = 0.0
            for prev, step in zip(steps, steps[1:]):
                gained = step.state ^ prev.state
                assert gained.bit_count() == 1
                assert step.state == prev.state | gained
                assert step.opened == gained.bit_length() - 1
                total += transition_time(inst, prev.state, step.state, cache)
                assert step.arrival == pytest.approx(total, rel=1e-9)
                ev = evaluate_state(inst, step.state, cache)
                assert step.fleet == pytest.approx(ev.fleet, rel=1e-12)
                assert step.acquisition_cost == pytest.approx(
                    ev.acquisition_cost, rel=1e-12)
            assert total == pytest.approx(result.optimal_time, rel=1e-9)


def test_format_schedule_lists_every_step(solved_pool):
    inst, start, bounds, cache = solved_pool[0]
    result = astar(inst, start, HeuristicKind("eh2"), cache, bounds)
    text = format_schedule(result)
    lines = text.splitlines()
    assert len(lines) == 2 + len(result.schedule)
    assert f"{result.optimal_time:.6f}" in lines[0]
    assert lines[2].lstrip().startswith("0")


# ------------------------------------------------------- stats and effort


def test_stats_and_determinism(solved_pool):
    for inst, start, bounds, _ in solved_pool[:2]:
        runs = []
        for _ in range(2):
            fresh = EvaluationCache()
            result = astar(inst, start, HeuristicKind("eh2"), fresh, bounds)
            runs.append(result)
            assert result.stats.expanded >= 1
            assert result.stats.remaining >= 0
            assert result.stats.evaluations == fresh.solves
            assert result.stats.evaluations > 0
            assert result.stats.wall_ms >= 0.0
        first, second = runs
        assert first.optimal_time == second.optimal_time
        assert first.schedule == tuple(
            dataclasses.replace(s) for s in second.schedule)
        assert (first.stats.expanded, first.stats.remaining,
                first.stats.evaluations) == (second.stats.expanded,
                                             second.stats.remaining,
                                             second.stats.evaluations)


def test_warm_cache_needs_no_new_evaluations(solved_pool):
    inst, start, bounds, cache = solved_pool[0]
    astar(inst, start, HeuristicKind("eh1"), cache, bounds)
    again = astar(inst, start, HeuristicKind("eh1"), cache, bounds)
    assert again.stats.evaluations == 0


def test_better_bounds_expand_no_more_nodes(solved_pool):
    for inst, start, bounds, cache in solved_pool:
        by_kind = {
            kind.variant: astar(inst, start, kind, cache, bounds).stats.expanded
            for kind in EXACT_KINDS}
        assert by_kind["eh1"] <= by_kind["zero"]
        assert by_kind["eh2"] <= by_kind["eh1"]
