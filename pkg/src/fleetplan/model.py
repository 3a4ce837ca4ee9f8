"""State economics for the investment schedule.

A state is the set of open stations, encoded as a bitmask over station
indices. Evaluating a state solves a two-stage LP over the open pairs: first
maximize hourly operating profit (served demand margin minus rebalancing
cost, both scaled by the service level), then minimize the acquisition cost,
which is the vehicle cost times the fleet size plus the opening cost of each
open station. Reinvesting the profit stream of the current state funds the
next opening, so the time to move from s to a superset t is the acquisition
gap divided by the profit of s.

Variable layout of the state LP (documented because callers reconstruct flow
matrices from the solution vector): with k open stations sorted ascending,
the first k*k columns are the empty-vehicle flows e in row-major order over
open pairs (the diagonal holds vehicles idling at a station), followed by
k*k - k occupied flows f over the off-diagonal pairs in row-major order.
Served demand pins f through mu_ij * f_ij = lambda_ij, expressed as a fixed
variable bound rather than an equality row.

The subset MILP used for profit bound tables and the budgeted initial state
keeps e over all ordered pairs, one pair-open indicator per unordered pair,
and one binary y per station; occupied flows are substituted out through the
pinned relation above, and the diagonal pair indicator coincides with y.
"""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .errors import (
    BudgetError,
    ConfigurationError,
    NumericalError,
    UndefinedTransitionError,
)
from .instances import Instance
from .lp import (
    BinaryProgram,
    LexicographicProgram,
    LinearProgram,
    Objective,
    ToleranceConfig,
    solve_binary_bnb,
    solve_lexicographic,
    solve_lp,
)

logger = logging.getLogger(__name__)

BOUND_MODES = ("exact_milp", "lp_relaxation")


def station_mask(stations: Iterable[int]) -> int:
    mask = 0
    for i in stations:
        mask |= 1 << i
    return mask


def open_stations(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    m = mask
    while m:
        if m & 1:
            out.append(i)
        m >>= 1
        i += 1
    return tuple(out)


@dataclass(frozen=True)
class StateEvaluation:
    """LP outcome for one open set; flows are kept only on request."""

    profit: float
    acquisition_cost: float
    fleet: float
    status: str
    full_flows: np.ndarray | None = None
    empty_flows: np.ndarray | None = None


class EvaluationCache:
    """Mask-keyed store of StateEvaluations; counts actual LP solves."""

    def __init__(self) -> None:
        self._data: dict[int, StateEvaluation] = {}
        self.solves = 0

    def get(self, mask: int) -> StateEvaluation | None:
        return self._data.get(mask)

    def put(self, mask: int, evaluation: StateEvaluation) -> None:
        self._data[mask] = evaluation

    def masks(self) -> tuple[int, ...]:
        """Stored state masks, in insertion order."""
        return tuple(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, mask: int) -> bool:
        return mask in self._data


def _idle_floor(instance: Instance) -> float:
    a = instance.service_level
    return a / (1.0 - a)


def build_state_lp(instance: Instance, mask: int) -> LexicographicProgram:
    """Two-stage LP for one open set: max profit, then min acquisition cost."""
    idx = np.array(open_stations(mask), dtype=np.intp)
    k = idx.size
    if k == 0:
        raise ValueError("state has no open stations")
    sub = np.ix_(idx, idx)
    lam = instance.arrival_rate[sub]
    mu = instance.return_rate[sub]
    margin = instance.margin[sub]
    reb = instance.rebalance_cost[sub]
    alpha = instance.service_level
    diag = np.eye(k, dtype=bool)
    off = ~diag
    n_e = k * k
    n_f = n_e - k

    c1 = np.concatenate([(-alpha * reb * mu).ravel(), (alpha * margin * mu)[off]])
    c2 = np.full(n_e + n_f, instance.vehicle_cost)
    f_pin = (lam / mu)[off]
    lb = np.concatenate([np.where(diag, _idle_floor(instance), 0.0).ravel(), f_pin])
    ub = np.concatenate([np.full(n_e, np.inf), f_pin])

    e_col = np.arange(n_e).reshape(k, k)
    if k >= 2:
        a = np.zeros((2 * k, n_e + n_f))
        b = np.empty(2 * k)
        for r in range(k):
            # incoming empties may not exceed the demand leaving station r
            a[r, e_col[:, r]] = mu[:, r]
            a[r, e_col[r, r]] = 0.0
            b[r] = lam[r].sum()
            # vehicles leaving station r balance those arriving
            row = a[k + r]
            row[e_col[r, :]] += mu[r, :]
            row[e_col[:, r]] -= mu[:, r]
            row[e_col[r, r]] = 0.0
            b[k + r] = lam[:, r].sum() - lam[r].sum()
        relations = ("<=",) * k + ("=",) * k
    else:
        a = np.zeros((0, n_e + n_f))
        b = np.zeros(0)
        relations = ()

    base = LinearProgram(c1, True, a, relations, b, lb=lb, ub=ub)
    return LexicographicProgram(base, Objective(c1, True), Objective(c2, False))


def evaluate_state(instance: Instance, mask: int,
                   cache: EvaluationCache | None = None,
                   keep_flows: bool = False,
                   tol: ToleranceConfig | None = None) -> StateEvaluation:
    """Solve (or fetch) the state LP; status reflects feasibility and profit sign."""
    if cache is not None:
        hit = cache.get(mask)
        if hit is not None and (not keep_flows or hit.empty_flows is not None):
            return hit
    idx = open_stations(mask)
    prog = build_state_lp(instance, mask)
    if cache is not None:
        cache.solves += 1
    try:
        sol = solve_lexicographic(prog, tol)
    except NumericalError as exc:
        raise NumericalError(f"state {idx}: {exc}") from exc
    if sol.status != "optimal":
        result = StateEvaluation(np.nan, np.nan, np.nan, "infeasible")
    else:
        profit = sol.objective_value
        fleet = float(sol.x.sum())
        cost = fleet * instance.vehicle_cost + float(instance.station_cost[list(idx)].sum())
        status = "ok" if profit > 0.0 else "nonpositive_profit"
        full = empty = None
        if keep_flows:
            k = len(idx)
            r = instance.num_stations
            sub = np.ix_(idx, idx)
            empty = np.zeros((r, r))
            empty[sub] = sol.x[:k * k].reshape(k, k)
            f_sub = np.zeros((k, k))
            f_sub[~np.eye(k, dtype=bool)] = sol.x[k * k:]
            full = np.zeros((r, r))
            full[sub] = f_sub
        result = StateEvaluation(profit, cost, fleet, status, full, empty)
    if cache is not None:
        cache.put(mask, result)
    return result


def acquisition_delta(instance: Instance, s: int, t: int,
                      cache: EvaluationCache | None = None) -> float:
    """Investment needed to move from open set s to superset t, floored at 0."""
    if s & ~t:
        raise ValueError(f"state {open_stations(s)} is not a subset of {open_stations(t)}")
    ev_s = evaluate_state(instance, s, cache)
    ev_t = evaluate_state(instance, t, cache)
    delta = ev_t.acquisition_cost - ev_s.acquisition_cost
    if delta < 0.0:
        logger.warning("acquisition cost shrinks from %s to %s (%.6g); clamping to 0",
                       open_stations(s), open_stations(t), delta)
        return 0.0
    return delta


def transition_time(instance: Instance, s: int, t: int,
                    cache: EvaluationCache | None = None) -> float:
    """Hours of reinvested profit needed to fund the move from s to t."""
    ev_s = evaluate_state(instance, s, cache)
    if not ev_s.profit > 0.0:
        raise UndefinedTransitionError(
            f"state {open_stations(s)} has nonpositive profit; no transition departs it")
    return acquisition_delta(instance, s, t, cache) / ev_s.profit


@dataclass(frozen=True)
class ProfitBoundTable:
    """Per-level profit caps: level(m) bounds p(s) for every s with m open stations."""

    bounds: dict[int, float]
    mode: str
    fallback_levels: frozenset[int] = frozenset()

    def level(self, m: int) -> float:
        try:
            return self.bounds[m]
        except KeyError:
            raise ConfigurationError(f"no profit bound for level {m}") from None


class _SubsetMilp:
    """Open-set selection MILP: pick stations (and flows) maximizing profit.

    Columns: e over all ordered pairs (row-major), one pair indicator per
    unordered pair i<j, then one binary y per station. The program either
    fixes the number of open stations or caps acquisition cost by a budget.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        r = instance.num_stations
        self.r = r
        self.n_e = r * r
        self.n_pairs = r * (r - 1) // 2
        self.x0 = self.n_e
        self.y0 = self.n_e + self.n_pairs
        self.ncols = self.y0 + r
        pair_no = np.full((r, r), -1, dtype=np.intp)
        k = 0
        for i in range(r):
            for j in range(i + 1, r):
                pair_no[i, j] = pair_no[j, i] = k
                k += 1
        self.pair_no = pair_no

        lam = instance.arrival_rate
        mu = instance.return_rate
        alpha = instance.service_level
        cp = instance.vehicle_cost
        kappa = _idle_floor(instance)
        self.kappa = kappa
        off = ~np.eye(r, dtype=bool)
        pinned = np.where(off, lam / mu, 0.0)

        c1 = np.zeros(self.ncols)
        c1[:self.n_e] = (-alpha * instance.rebalance_cost * mu).ravel()
        c2 = np.zeros(self.ncols)
        c2[:self.n_e] = cp
        c2[self.y0:] = instance.station_cost
        revenue = alpha * lam * instance.margin
        for i in range(r):
            for j in range(i + 1, r):
                p = self.x0 + pair_no[i, j]
                c1[p] = revenue[i, j] + revenue[j, i]
                c2[p] = cp * (pinned[i, j] + pinned[j, i])
        self.c1, self.c2 = c1, c2

        total_demand = lam.sum()
        rows: list[np.ndarray] = []
        rels: list[str] = []
        rhs: list[float] = []
        e_col = np.arange(self.n_e).reshape(r, r)

        def add(row, rel, b):
            rows.append(row)
            rels.append(rel)
            rhs.append(b)

        for i in range(r):
            # empties arriving at i stay within the demand i can emit
            row = np.zeros(self.ncols)
            row[e_col[:, i]] = mu[:, i]
            row[e_col[i, i]] = 0.0
            for j in range(r):
                if j != i:
                    row[self.x0 + pair_no[i, j]] -= lam[i, j]
            add(row, "<=", 0.0)
            # vehicle flow conservation at i
            row = np.zeros(self.ncols)
            row[e_col[i, :]] += mu[i, :]
            row[e_col[:, i]] -= mu[:, i]
            row[e_col[i, i]] = 0.0
            for j in range(r):
                if j != i:
                    row[self.x0 + pair_no[i, j]] += lam[i, j] - lam[j, i]
            add(row, "=", 0.0)
            # a safety stock of idle vehicles whenever the station opens
            row = np.zeros(self.ncols)
            row[e_col[i, i]] = 1.0
            row[self.y0 + i] = -kappa
            add(row, ">=", 0.0)
            # idle vehicles vanish when the station is closed
            others = mu[i, off[i]]
            row = np.zeros(self.ncols)
            row[e_col[i, i]] = 1.0
            row[self.y0 + i] = -(kappa + total_demand / others.min())
            add(row, "<=", 0.0)
        for i in range(r):
            for j in range(r):
                if i == j:
                    continue
                # an empty flow needs its pair open
                row = np.zeros(self.ncols)
                row[e_col[i, j]] = 1.0
                row[self.x0 + pair_no[i, j]] = -total_demand / mu[i, j]
                add(row, "<=", 0.0)
        for i in range(r):
            for j in range(i + 1, r):
                p = self.x0 + pair_no[i, j]
                for station in (i, j):
                    row = np.zeros(self.ncols)
                    row[p] = 1.0
                    row[self.y0 + station] = -1.0
                    add(row, "<=", 0.0)
                row = np.zeros(self.ncols)
                row[p] = -1.0
                row[self.y0 + i] = 1.0
                row[self.y0 + j] = 1.0
                add(row, "<=", 1.0)
        self.a = np.array(rows)
        self.relations = tuple(rels)
        self.b = np.array(rhs)

    def _bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lb = np.zeros(self.ncols)
        ub = np.full(self.ncols, np.inf)
        ub[self.x0:] = 1.0
        return lb, ub

    def _with_row(self, row: np.ndarray, rel: str,
                  b: float) -> tuple[np.ndarray, tuple, np.ndarray]:
        a = np.vstack([self.a, row])
        return a, self.relations + (rel,), np.append(self.b, b)

    def count_program(self, m: int) -> BinaryProgram:
        row = np.zeros(self.ncols)
        row[self.y0:] = 1.0
        a, rels, b = self._with_row(row, "=", float(m))
        lb, ub = self._bounds()
        base = LinearProgram(self.c1, True, a, rels, b, lb=lb, ub=ub)
        lex = LexicographicProgram(base, Objective(self.c1, True),
                                   Objective(self.c2, False))
        return BinaryProgram(lex, tuple(range(self.y0, self.ncols)))

    def budget_program(self) -> BinaryProgram:
        a, rels, b = self._with_row(self.c2.copy(), "<=", self.instance.budget)
        lb, ub = self._bounds()
        base = LinearProgram(self.c1, True, a, rels, b, lb=lb, ub=ub)
        lex = LexicographicProgram(base, Objective(self.c1, True),
                                   Objective(self.c2, False))
        return BinaryProgram(lex, tuple(range(self.y0, self.ncols)))

    def open_set(self, x: np.ndarray) -> int:
        return station_mask(i for i in range(self.r) if x[self.y0 + i] > 0.5)

    def propagate(self, j: int, val: float, lb: np.ndarray,
                  ub: np.ndarray) -> None:
        """Tighten bounds implied by fixing one station open or closed."""
        s = j - self.y0
        if val == 0.0:
            # a closed station carries no empty flows and no active pairs
            ub[s * self.r:(s + 1) * self.r] = 0.0
            for i in range(self.r):
                ub[i * self.r + s] = 0.0
                if i != s:
                    ub[self.x0 + self.pair_no[i, s]] = 0.0
        else:
            lb[s * self.r + s] = max(lb[s * self.r + s], self.kappa)


def profit_bounds(instance: Instance, mode: str = "lp_relaxation",
                  m_min: int | None = None,
                  cache: EvaluationCache | None = None,
                  node_limit: int = 20_000,
                  tol: ToleranceConfig | None = None) -> ProfitBoundTable:
    """Best achievable profit per open-station count, m_min through all open.

    exact_milp proves each level with branch and bound; lp_relaxation takes
    the (valid, looser) continuous bound. A level whose proof hits the node
    limit falls back to its relaxation value and is flagged.
    """
    if mode not in BOUND_MODES:
        raise ValueError(f"mode must be one of {BOUND_MODES}, got {mode!r}")
    r = instance.num_stations
    if m_min is None:
        m_min = len(open_stations(initial_state(instance, cache, tol=tol)[0]))
    milp = _SubsetMilp(instance)
    bounds: dict[int, float] = {}
    fallback: set[int] = set()
    for m in range(m_min, r + 1):
        if m == r:
            full = evaluate_state(instance, (1 << r) - 1, cache, tol=tol)
            bounds[m] = full.profit
            continue
        prog = milp.count_program(m)
        if mode == "lp_relaxation":
            bounds[m] = _stage1_relaxation(prog, tol)
            continue
        try:
            sol = solve_binary_bnb(prog, tol, node_limit=node_limit,
                                   propagate=milp.propagate)
        except NumericalError:
            bounds[m] = _stage1_relaxation(prog, tol)
            fallback.add(m)
            continue
        if sol.status != "optimal":
            raise NumericalError(f"profit bound level {m} reported {sol.status}")
        if sol.proven:
            bounds[m] = sol.objective_value
        else:
            bounds[m] = sol.bound
            fallback.add(m)
    return ProfitBoundTable(bounds, mode, frozenset(fallback))


def _stage1_relaxation(prog: BinaryProgram, tol: ToleranceConfig | None) -> float:
    base = prog.lex.base
    o1 = prog.lex.objective_1
    lp = LinearProgram(o1.coefficients, o1.maximize, base.a, base.relations,
                       base.b, lb=base.lb, ub=base.ub)
    sol = solve_lp(lp, tol)
    if sol.status != "optimal":
        raise NumericalError(f"bound relaxation reported {sol.status}")
    return sol.objective_value


def initial_state(instance: Instance,
                  cache: EvaluationCache | None = None,
                  node_limit: int = 50_000,
                  tol: ToleranceConfig | None = None) -> tuple[int, StateEvaluation]:
    """Most profitable open set affordable within the instance budget."""
    milp = _SubsetMilp(instance)
    sol = solve_binary_bnb(milp.budget_program(), tol, node_limit=node_limit,
                           propagate=milp.propagate)
    if sol.status != "optimal":
        raise BudgetError(f"budget allocation reported {sol.status}")
    if not sol.proven:
        raise NumericalError("budget allocation hit the branch-and-bound node limit")
    if sol.objective_value <= 0.0:
        raise BudgetError(
            f"budget {instance.budget} cannot fund an open set with positive profit")
    mask = milp.open_set(sol.x)
    return mask, evaluate_state(instance, mask, cache, tol=tol)


def save_evaluation(evaluation: StateEvaluation, path: str | os.PathLike) -> None:
    """Debugging export in the same JSON style as instance files."""
    doc = {
        "profit": evaluation.profit,
        "acquisition_cost": evaluation.acquisition_cost,
        "fleet": evaluation.fleet,
        "status": evaluation.status,
        "full_flows": None if evaluation.full_flows is None
        else evaluation.full_flows.tolist(),
        "empty_flows": None if evaluation.empty_flows is None
        else evaluation.empty_flows.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
