"""State economics against hand-solved networks and structural invariants.

The two tiny networks used throughout were solved by hand:

* symmetric pair: rates 10/h both ways, return rate 5/h, margin 2, unit
  rebalance cost, alpha 0.5. Demand balances, so no empties move, pinned
  occupied flows are 10/5 = 2 each way, one idle vehicle per station, and
  profit is 0.5 * (2 * 10 * 2) = 20/h. Fleet 2+2+1+1 = 6, acquisition cost
  3 * 6 + 500 + 700 = 1218.
* lopsided pair: rates 10/h and 4/h. Station 1 sheds 6/h more than it gets
  back, so e_21 = 6/5 = 1.2 restores balance (e_12 = 0 is cheapest), profit
  0.5 * (20 + 8 - 1 * 5 * 1.2) = 11/h, fleet 2 + 0.8 + 1.2 + 2 = 6.
"""

from __future__ import annotations

import dataclasses
import itertools

import numpy as np
import pytest

from fleetplan.errors import (
    BudgetError,
    ConfigurationError,
    UndefinedTransitionError,
)
from fleetplan.instances import Instance, generate, parse_name
from fleetplan.model import (
    EvaluationCache,
    ProfitBoundTable,
    StateEvaluation,
    acquisition_delta,
    build_state_lp,
    evaluate_state,
    initial_state,
    open_stations,
    profit_bounds,
    station_mask,
    transition_time,
)

KAPPA = 1.0  # alpha 0.5 everywhere in these tests


def pair_instance(lam_12: float = 10.0, lam_21: float = 10.0) -> Instance:
    lam = [[0.0, lam_12], [lam_21, 0.0]]
    mu = [[20.0, 5.0], [5.0, 20.0]]
    margin = [[0.0, 2.0], [2.0, 0.0]]
    reb = [[0.0, 1.0], [1.0, 0.0]]
    return Instance(2, [[0.0, 0.0], [1.0, 0.0]], lam, mu, margin, reb,
                    [500.0, 700.0], 3.0, 0.5, 1300.0, "pair", 0)


def triangle_instance() -> Instance:
    rng = np.random.default_rng(5150)
    lam = rng.uniform(2.0, 12.0, size=(3, 3))
    np.fill_diagonal(lam, 0.0)
    mu = rng.uniform(3.0, 8.0, size=(3, 3))
    mu = (mu + mu.T) / 2.0
    margin = rng.uniform(0.5, 2.5, size=(3, 3))
    reb = rng.uniform(0.2, 1.5, size=(3, 3))
    np.fill_diagonal(margin, 0.0)
    np.fill_diagonal(reb, 0.0)
    return Instance(3, rng.uniform(0.0, 2.0, size=(3, 2)), lam, mu, margin,
                    reb, [400.0, 550.0, 600.0], 2.0, 0.5, 2000.0, "tri", 0)


class TestMasks:
    def test_round_trip(self):
        assert open_stations(station_mask([0, 3, 5])) == (0, 3, 5)
        assert station_mask([]) == 0
        assert open_stations(0) == ()


class TestStateLp:
    def test_singleton_shape(self):
        prog = build_state_lp(pair_instance(), 0b01)
        assert prog.base.num_vars == 1
        assert prog.base.num_constraints == 0
        assert prog.base.lb[0] == KAPPA

    def test_pair_shape(self):
        prog = build_state_lp(pair_instance(), 0b11)
        assert prog.base.num_vars == 6
        assert prog.base.relations == ("<=", "<=", "=", "=")

    def test_stage1_rebalance_coefficient(self):
        inst = pair_instance()
        prog = build_state_lp(inst, 0b11)
        # e block is row-major over open pairs; e_01 sits at column 1
        expected = -0.5 * inst.rebalance_cost[0, 1] * inst.return_rate[0, 1]
        assert prog.objective_1.coefficients[1] == pytest.approx(expected)

    def test_singleton_evaluation(self):
        inst = pair_instance()
        ev = evaluate_state(inst, 0b10, keep_flows=True)
        assert ev.status == "nonpositive_profit"
        assert ev.profit == pytest.approx(0.0, abs=1e-12)
        assert ev.fleet == pytest.approx(1.0, abs=1e-9)
        assert ev.acquisition_cost == pytest.approx(3.0 + 700.0, abs=1e-9)
        assert ev.empty_flows[1, 1] == pytest.approx(KAPPA, abs=1e-9)

    def test_symmetric_pair_hand_solution(self):
        ev = evaluate_state(pair_instance(), 0b11, keep_flows=True)
        assert ev.status == "ok"
        assert ev.profit == pytest.approx(20.0, abs=1e-7)
        assert ev.fleet == pytest.approx(6.0, abs=1e-7)
        assert ev.acquisition_cost == pytest.approx(1218.0, abs=1e-6)
        assert ev.full_flows[0, 1] == pytest.approx(2.0, abs=1e-9)
        assert ev.full_flows[1, 0] == pytest.approx(2.0, abs=1e-9)
        assert ev.empty_flows[0, 1] == pytest.approx(0.0, abs=1e-7)
        assert ev.empty_flows[1, 0] == pytest.approx(0.0, abs=1e-7)
        assert ev.empty_flows[0, 0] == pytest.approx(KAPPA, abs=1e-7)

    def test_lopsided_pair_hand_solution(self):
        ev = evaluate_state(pair_instance(lam_21=4.0), 0b11, keep_flows=True)
        assert ev.profit == pytest.approx(11.0, abs=1e-7)
        assert ev.fleet == pytest.approx(6.0, abs=1e-7)
        assert ev.empty_flows[1, 0] == pytest.approx(1.2, abs=1e-7)
        assert ev.empty_flows[0, 1] == pytest.approx(0.0, abs=1e-7)
        assert ev.full_flows[1, 0] == pytest.approx(0.8, abs=1e-9)

    def test_cache_transparency_and_solve_count(self):
        inst = pair_instance()
        cache = EvaluationCache()
        first = evaluate_state(inst, 0b11, cache)
        again = evaluate_state(inst, 0b11, cache)
        assert again is first
        assert cache.solves == 1
        fresh = evaluate_state(inst, 0b11)
        assert fresh.profit == first.profit
        assert fresh.acquisition_cost == first.acquisition_cost
        # asking for flows later upgrades the cached entry
        flows = evaluate_state(inst, 0b11, cache, keep_flows=True)
        assert flows.empty_flows is not None
        assert cache.solves == 2
        assert evaluate_state(inst, 0b11, cache).empty_flows is not None


def _residuals(inst: Instance, mask: int, ev: StateEvaluation) -> float:
    """Largest violation of the operating constraints by the returned flows."""
    idx = list(open_stations(mask))
    lam, mu = inst.arrival_rate, inst.return_rate
    e, f = ev.empty_flows, ev.full_flows
    worst = 0.0
    for i in idx:
        others = [j for j in idx if j != i]
        inflow = sum(mu[j, i] * e[j, i] for j in others)
        worst = max(worst, inflow - sum(lam[i, j] for j in others))
        bal = sum(mu[i, j] * e[i, j] - mu[j, i] * e[j, i] for j in others) \
            - sum(lam[j, i] - lam[i, j] for j in others)
        worst = max(worst, abs(bal))
        worst = max(worst, KAPPA - e[i, i])
        for j in others:
            worst = max(worst, abs(f[i, j] - lam[i, j] / mu[i, j]))
    total = sum(e[i, j] + f[i, j] for i in idx for j in idx)
    worst = max(worst, abs(total - ev.fleet))
    return worst


class TestEvaluationInvariants:
    def test_constraints_hold_on_benchmark_states(self):
        inst = generate(parse_name("C-7-BAL"))
        rng = np.random.default_rng(99)
        cache = EvaluationCache()
        for _ in range(25):
            size = int(rng.integers(2, 8))
            idx = rng.choice(7, size=size, replace=False)
            mask = station_mask(int(i) for i in idx)
            ev = evaluate_state(inst, mask, cache, keep_flows=True)
            assert ev.status in ("ok", "nonpositive_profit")
            assert _residuals(inst, mask, ev) <= 1e-7

    def test_profit_decomposes_over_flows(self):
        inst = generate(parse_name("H-7-BAL"))
        alpha = inst.service_level
        for mask in (0b0000111, 0b1010101, 0b1111111):
            ev = evaluate_state(inst, mask, keep_flows=True)
            idx = list(open_stations(mask))
            served = sum(inst.arrival_rate[i, j] * inst.margin[i, j]
                         for i in idx for j in idx)
            reb = sum(inst.rebalance_cost[i, j] * inst.return_rate[i, j]
                      * ev.empty_flows[i, j] for i in idx for j in idx)
            assert ev.profit == pytest.approx(alpha * (served - reb), rel=1e-6)

    def test_profit_grows_along_sampled_chains(self):
        inst = generate(parse_name("C-7-BAL"))
        rng = np.random.default_rng(7)
        cache = EvaluationCache()
        for _ in range(10):
            order = rng.permutation(7)
            mask = station_mask(int(i) for i in order[:2])
            prev = evaluate_state(inst, mask, cache).profit
            for nxt in order[2:]:
                mask |= 1 << int(nxt)
                cur = evaluate_state(inst, mask, cache).profit
                assert cur >= prev - 1e-6
                prev = cur


class TestTransitions:
    def test_delta_identity_and_telescoping(self):
        inst = triangle_instance()
        cache = EvaluationCache()
        s, t_mid, t_all = 0b011, 0b111, 0b111
        assert acquisition_delta(inst, s, s, cache) == 0.0
        d_direct = acquisition_delta(inst, 0b001, t_all, cache)
        d_split = acquisition_delta(inst, 0b001, s, cache) \
            + acquisition_delta(inst, s, t_mid, cache)
        assert d_direct == pytest.approx(d_split, rel=1e-9)

    def test_subset_contract(self):
        inst = triangle_instance()
        with pytest.raises(ValueError, match="subset"):
            acquisition_delta(inst, 0b011, 0b101)

    def test_negative_delta_clamps_and_warns(self, caplog):
        inst = triangle_instance()
        cache = EvaluationCache()
        cache.put(0b001, StateEvaluation(5.0, 900.0, 2.0, "ok"))
        cache.put(0b011, StateEvaluation(9.0, 850.0, 1.0, "ok"))
        with caplog.at_level("WARNING", logger="fleetplan.model"):
            assert acquisition_delta(inst, 0b001, 0b011, cache) == 0.0
        assert any("clamping" in rec.message for rec in caplog.records)

    def test_transition_time_arithmetic(self):
        inst = triangle_instance()
        cache = EvaluationCache()
        cache.put(0b001, StateEvaluation(50.0, 1000.0, 2.0, "ok"))
        cache.put(0b011, StateEvaluation(80.0, 1100.0, 3.0, "ok"))
        assert transition_time(inst, 0b001, 0b011, cache) == pytest.approx(2.0)

    def test_transition_needs_positive_profit(self):
        inst = pair_instance()
        with pytest.raises(UndefinedTransitionError):
            transition_time(inst, 0b01, 0b11)

    def test_consecutive_split_never_slower(self):
        # going through an intermediate state can only help when profit grows
        inst = generate(parse_name("C-7-BAL"))
        cache = EvaluationCache()
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(12):
            order = [int(v) for v in rng.permutation(7)]
            s = station_mask(order[:3])
            mid = s | 1 << order[3]
            t = mid | 1 << order[4]
            p_s = evaluate_state(inst, s, cache).profit
            p_mid = evaluate_state(inst, mid, cache).profit
            if p_s <= 0.0 or p_mid < p_s:
                continue
            direct = transition_time(inst, s, t, cache)
            split = transition_time(inst, s, mid, cache) \
                + transition_time(inst, mid, t, cache)
            assert direct >= split - 1e-9
            checked += 1
        assert checked > 0


class TestProfitBounds:
    def test_exact_matches_enumeration_on_triangle(self):
        inst = triangle_instance()
        cache = EvaluationCache()
        table = profit_bounds(inst, "exact_milp", m_min=1, cache=cache)
        for m in (1, 2, 3):
            best = max(
                evaluate_state(inst, station_mask(combo), cache).profit
                for combo in itertools.combinations(range(3), m))
            assert table.level(m) == pytest.approx(best, rel=1e-6, abs=1e-6)
        assert table.fallback_levels == frozenset()

    def test_relaxation_dominates_exact(self):
        inst = triangle_instance()
        exact = profit_bounds(inst, "exact_milp", m_min=1)
        relax = profit_bounds(inst, "lp_relaxation", m_min=1)
        for m in (1, 2, 3):
            assert relax.level(m) >= exact.level(m) - 1e-7

    def test_bounds_admissible_for_sampled_states(self):
        inst = generate(parse_name("C-7-BAL"))
        cache = EvaluationCache()
        table = profit_bounds(inst, "lp_relaxation", m_min=2, cache=cache)
        rng = np.random.default_rng(3)
        for _ in range(20):
            size = int(rng.integers(2, 8))
            idx = rng.choice(7, size=size, replace=False)
            mask = station_mask(int(i) for i in idx)
            ev = evaluate_state(inst, mask, cache)
            assert ev.profit <= table.level(size) + 1e-6

    def test_top_level_equals_full_state(self):
        inst = triangle_instance()
        table = profit_bounds(inst, "lp_relaxation", m_min=3)
        full = evaluate_state(inst, 0b111)
        assert table.level(3) == full.profit

    def test_missing_level_raises(self):
        table = ProfitBoundTable({2: 5.0}, "lp_relaxation")
        with pytest.raises(ConfigurationError):
            table.level(3)

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            profit_bounds(triangle_instance(), "both")


class TestInitialState:
    def test_generous_budget_opens_everything(self):
        inst = triangle_instance()
        mask, ev = initial_state(inst)
        assert mask == 0b111
        assert ev.acquisition_cost <= inst.budget

    def test_budget_picks_best_affordable_pair(self):
        cache = EvaluationCache()
        base = triangle_instance()
        all_three = evaluate_state(base, 0b111, cache)
        inst = dataclasses.replace(base, budget=all_three.acquisition_cost - 1.0)
        mask, ev = initial_state(inst, cache)
        pairs = [(station_mask(c), evaluate_state(inst, station_mask(c), cache))
                 for c in itertools.combinations(range(3), 2)]
        affordable = [kv for kv in pairs if kv[1].acquisition_cost <= inst.budget]
        best_pair = max(affordable, key=lambda kv: kv[1].profit)
        assert ev.acquisition_cost <= inst.budget + 1e-6
        assert mask == best_pair[0]
        assert ev.profit == pytest.approx(best_pair[1].profit, rel=1e-7)

    def test_benchmark_start_sizes(self):
        small = generate(parse_name("C-7-BAL"))
        mask, ev = initial_state(small)
        assert len(open_stations(mask)) in (2, 3)
        assert ev.profit > 0.0
        assert ev.acquisition_cost <= small.budget + 1e-6

    def test_insufficient_budget_raises(self):
        inst = dataclasses.replace(triangle_instance(), budget=500.0)
        with pytest.raises(BudgetError):
            initial_state(inst)

    def test_deterministic(self):
        inst = generate(parse_name("Q-9-BAL"))
        m1, _ = initial_state(inst)
        m2, _ = initial_state(inst)
        assert m1 == m2
