"""Investment scheduling for station-based vehicle sharing systems.

The package answers one planning question: given a set of candidate
stations, a demand model, and a starting budget, in which order should the
remaining stations be opened so that the whole network is running as early
as possible, when every acquisition must be funded by reinvested operating
profit?

Layering, bottom up:

* :mod:`fleetplan.lp` - dense two-phase simplex with bounded variables,
  lexicographic two-stage solves, and branch and bound for binary programs.
* :mod:`fleetplan.instances` - benchmark problem generator plus JSON load
  and save.
* :mod:`fleetplan.model` - the station-set economics: per-state profit and
  acquisition cost, transition times, per-level profit caps, and the
  budget-constrained start state.
* :mod:`fleetplan.search` - best-first schedule search with admissible and
  approximate heuristics, and a permutation-enumeration oracle.
* :mod:`fleetplan.cli` - the ``fleetplan`` command: ``gen``, ``solve``,
  ``bench``, ``oracle``.
"""

from .errors import (
    BudgetError,
    ConfigurationError,
    FleetPlanError,
    InstanceParseError,
    InstanceValidationError,
    NoScheduleError,
    NumericalError,
    UndefinedTransitionError,
)
from .instances import (
    BALANCES,
    LAYOUTS,
    NAMED_BENCHMARKS,
    GenSpec,
    Instance,
    generate,
    load,
    parse_name,
    save,
)
from .lp import ToleranceConfig
from .model import (
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
from .search import (
    DeltaLbContext,
    HeuristicKind,
    ScheduleStep,
    SearchResult,
    SearchStats,
    astar,
    build_delta_context,
    format_schedule,
    oracle_enumerate,
    successors,
)

__version__ = "0.1.0"

__all__ = [
    "BALANCES",
    "BudgetError",
    "ConfigurationError",
    "DeltaLbContext",
    "EvaluationCache",
    "FleetPlanError",
    "GenSpec",
    "HeuristicKind",
    "Instance",
    "InstanceParseError",
    "InstanceValidationError",
    "LAYOUTS",
    "NAMED_BENCHMARKS",
    "NoScheduleError",
    "NumericalError",
    "ProfitBoundTable",
    "ScheduleStep",
    "SearchResult",
    "SearchStats",
    "StateEvaluation",
    "ToleranceConfig",
    "UndefinedTransitionError",
    "acquisition_delta",
    "astar",
    "build_delta_context",
    "build_state_lp",
    "evaluate_state",
    "format_schedule",
    "generate",
    "initial_state",
    "load",
    "open_stations",
    "oracle_enumerate",
    "parse_name",
    "profit_bounds",
    "save",
    "station_mask",
    "successors",
    "transition_time",
    "__version__",
]
