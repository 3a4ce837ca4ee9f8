"""How one open-station set turns demand into profit, fleet, and cost.

Every planning decision in this package rests on a single primitive: given
the set of stations currently open, a two-stage linear program finds the
most profitable way to run them (occupied trips are pinned by demand, empty
repositioning trips balance the vehicle flows) and then the cheapest fleet
that realizes that profit. This script walks through those numbers on a
seven-station ring.

Run from the repository root:  python3 demos/01_state_economics.py
"""

from fleetplan import (
    EvaluationCache,
    acquisition_delta,
    evaluate_state,
    generate,
    open_stations,
    parse_name,
    station_mask,
    transition_time,
)

inst = generate(parse_name("C-7-BAL", seed=1))
print(f"instance {inst.name}: {inst.num_stations} stations, "
      f"budget {inst.budget:g}, vehicle cost {inst.vehicle_cost:g}")

cache = EvaluationCache()

# A single open station has no one to trade trips with: zero profit.
solo = station_mask([0])
print(f"\nstate {{0}}: status = {evaluate_state(inst, solo, cache).status!r}")

# Two stations already sustain a business.
duo = station_mask([0, 3])
ev = evaluate_state(inst, duo, cache, keep_flows=True)
print(f"state {{0,3}}: profit {ev.profit:.2f}/h, fleet {ev.fleet:.2f} "
      f"vehicles, capital {ev.acquisition_cost:.2f}")
print("occupied flows (vehicles en route, demand-pinned):")
print(ev.full_flows.round(3))
print("empty repositioning flows chosen by the optimizer:")
print(ev.empty_flows.round(3))

# Opening one more station needs extra capital; the running profit pays
# for it over time. That funding time is the arc weight of the search.
trio = station_mask([0, 3, 5])
extra = acquisition_delta(inst, duo, trio, cache)
hours = transition_time(inst, duo, trio, cache)
ev3 = evaluate_state(inst, trio, cache)
print(f"\nadding station 5: extra capital {extra:.2f}, funded in "
      f"{hours:.2f} h at {ev.profit:.2f}/h")
print(f"state {{0,3,5}}: profit {ev3.profit:.2f}/h, fleet {ev3.fleet:.2f}")

# Profit is monotone in practice but far from linear; compare a few sets.
print("\nprofit by open set:")
for members in ([0, 1], [0, 3], [0, 1, 2], [0, 3, 5], [0, 1, 2, 3], list(range(7))):
    mask = station_mask(members)
    e = evaluate_state(inst, mask, cache)
    print(f"  {{{','.join(map(str, open_stations(mask)))}}}: "
          f"{e.profit:8.2f}/h  cost {e.acquisition_cost:9.2f}")

print(f"\n{cache.solves} linear programs solved, {len(cache)} states cached")
