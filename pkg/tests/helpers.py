"""Shared test utilities: superset-lattice walks and exact remaining times."""

from __future__ import annotations

import itertools

import numpy as np

from fleetplan.instances import Instance
from fleetplan.model import EvaluationCache
from fleetplan.search import successors


def lattice_masks(num_stations: int, start: int) -> list[int]:
    """Every superset of the start state, smallest first."""
    closed = [o for o in range(num_stations) if not start & (1 << o)]
    masks = []
    for size in range(len(closed) + 1):
        for combo in itertools.combinations(closed, size):
            m = start
            for o in combo:
                m |= 1 << o
            masks.append(m)
    return masks


def true_cost_to_go(inst: Instance, start: int,
                    cache: EvaluationCache) -> dict[int, float]:
    """Exact remaining time per state, by backward induction over supersets.

    Infinity marks states from which every continuation dies at a
    loss-making set. This derivation is independent of both the best-first
    search and the permutation oracle.
    """
    goal = (1 << inst.num_stations) - 1
    closed = [o for o in range(inst.num_stations) if not start & (1 << o)]
    remaining = {goal: 0.0}
    for size in range(len(closed) - 1, -1, -1):
        for combo in itertools.combinations(closed, size):
            m = start
            for o in combo:
                m |= 1 << o
            best = np.inf
            for t, tau in successors(inst, m, cache):
                best = min(best, tau + remaining.get(t, np.inf))
            remaining[m] = best
    return remaining
