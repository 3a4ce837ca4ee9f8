"""How tight are the lower bounds? Heuristics versus the true remaining time.

For a small instance the exact remaining time of every reachable state can
be computed by backward induction over supersets. This script tabulates the
three admissible bounds against that truth along the optimal schedule:
each one must never exceed the true value (that is what makes the search
results optimal), and eh2/eh3 should sit much closer to it than eh1.

Run from the repository root:  python3 demos/03_heuristic_quality.py
"""

import itertools

import numpy as np

from fleetplan import (
    EvaluationCache,
    HeuristicKind,
    astar,
    build_delta_context,
    evaluate_state,
    generate,
    initial_state,
    open_stations,
    parse_name,
    profit_bounds,
    successors,
)
from fleetplan.search import h_eh1, h_eh2, h_eh3

inst = generate(parse_name("H-7-IMB", seed=2))
cache = EvaluationCache()
start, _ = initial_state(inst, cache)
bounds = profit_bounds(inst, m_min=len(open_stations(start)), cache=cache)

# True remaining time by backward induction over supersets of the start.
goal = (1 << inst.num_stations) - 1
closed = [o for o in range(inst.num_stations) if not start & (1 << o)]
truth = {goal: 0.0}
for size in range(len(closed) - 1, -1, -1):
    for combo in itertools.combinations(closed, size):
        mask = start
        for o in combo:
            mask |= 1 << o
        truth[mask] = min((tau + truth[t] for t, tau in
                           successors(inst, mask, cache)), default=np.inf)

result = astar(inst, start, HeuristicKind("eh2"), cache, bounds)
ctx0 = build_delta_context(inst, start)
cost_final = evaluate_state(inst, goal, cache).acquisition_cost

print(f"{inst.name}: optimal completion in {result.optimal_time:.2f} h\n")
print("along the optimal schedule (every bound must stay at or below truth):")
print(f"{'state':>16} {'truth':>9} {'eh1':>9} {'eh2':>9} {'eh3':>9}")
for step in result.schedule:
    ev = evaluate_state(inst, step.state, cache)
    if ev.status != "ok":
        continue
    ctx = build_delta_context(inst, step.state)
    row = (truth[step.state],
           h_eh1(ev, bounds, cost_final, inst.num_stations),
           h_eh2(ctx, ev, bounds, cost_final),
           h_eh3(ctx0, step.state, ev, bounds, cost_final))
    members = ",".join(map(str, open_stations(step.state)))
    print(f"{{{members}}}".rjust(16) + "".join(f" {v:9.2f}" for v in row))

# Aggregate tightness over the whole reachable lattice.
ratios = {name: [] for name in ("eh1", "eh2", "eh3")}
for mask, h_true in truth.items():
    if not np.isfinite(h_true) or h_true <= 0.0 or mask == goal:
        continue
    ev = evaluate_state(inst, mask, cache)
    if ev.status != "ok":
        continue
    ctx = build_delta_context(inst, mask)
    ratios["eh1"].append(h_eh1(ev, bounds, cost_final, inst.num_stations) / h_true)
    ratios["eh2"].append(h_eh2(ctx, ev, bounds, cost_final) / h_true)
    ratios["eh3"].append(h_eh3(ctx0, mask, ev, bounds, cost_final) / h_true)
print("\nbound / truth over all reachable states (1.0 would be perfect):")
for name, vals in ratios.items():
    arr = np.array(vals)
    print(f"  {name}: mean {arr.mean():.3f}, worst {arr.min():.3f}, "
          f"best {arr.max():.3f}  (max may not exceed 1)")
