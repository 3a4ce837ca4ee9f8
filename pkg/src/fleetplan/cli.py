"""Command-line harness: generate instances, solve schedules, sweep benchmarks.

Subcommands:

* ``gen``    write one generated instance to a JSON file
* ``solve``  compute the start state and run one search kind, printing the
  opening schedule plus a one-row stats CSV
* ``bench``  run an instances-by-kinds matrix into a CSV whose non-time
  columns are deterministic for fixed seeds
* ``oracle`` exact optimum by permutation enumeration (small gaps only)

Exit codes: 0 ok, 2 validation problem, 3 infeasible instance or no
schedule, 4 numerical failure. Tolerances can be overridden through
environment variables named FLEETPLAN_<FIELD> for each tolerance field,
for example FLEETPLAN_EPS_FEAS=1e-8 or FLEETPLAN_BLAND_AFTER=40.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from .errors import (
    BudgetError,
    ConfigurationError,
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
from .model import EvaluationCache, initial_state, open_stations, profit_bounds
from .search import HeuristicKind, astar, format_schedule, oracle_enumerate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_SCHEDULE = 3
EXIT_NUMERICAL = 4

CSV_COLUMNS = ("instance", "kind", "param", "opt", "gap_pct", "expanded",
               "remaining", "evaluations", "time_ms", "seed", "bound_mode")

_LETTERS = {"C": "circular", "H": "hexagonal", "Q": "quadratic"}
_EXACT_LABELS = ("dijkstra", "eh1", "eh2", "eh3")
_ENV_PREFIX = "FLEETPLAN_"


@dataclass(frozen=True)
class ResolvedKind:
    """One bench cell recipe: CSV label, param column text, search kind."""

    label: str
    param: str
    kind: HeuristicKind


@dataclass(frozen=True)
class RunConfig:
    """Everything one solve or bench run needs, resolved from flags."""

    sources: tuple[str, ...]
    kinds: tuple[ResolvedKind, ...]
    bound_mode: str
    node_limit: int
    out_path: str | None
    seed: int
    tol: ToleranceConfig | None

    def __post_init__(self) -> None:
        if not self.kinds:
            raise ValueError("at least one heuristic kind is required")


@dataclass(frozen=True)
class BenchReport:
    """Finished bench matrix; row order is instances-major, kinds-minor."""

    rows: tuple[dict[str, str], ...]

    def write(self, stream) -> None:
        stream.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            stream.write(",".join(row[c] for c in CSV_COLUMNS) + "\n")


def tolerance_from_env(env: Mapping[str, str] = os.environ) -> ToleranceConfig | None:
    """Tolerance override assembled from FLEETPLAN_* variables, if any are set."""
    kwargs = {}
    for field in dataclasses.fields(ToleranceConfig):
        raw = env.get(_ENV_PREFIX + field.name.upper())
        if raw is None:
            continue
        caster = int if field.type == "int" else float
        try:
            kwargs[field.name] = caster(raw)
        except ValueError:
            raise ValueError(
                f"{_ENV_PREFIX}{field.name.upper()}={raw!r} is not a number") from None
    return ToleranceConfig(**kwargs) if kwargs else None


def resolve_kinds(tokens: Iterable[str], gammas: Sequence[float],
                  weights: Sequence[float]) -> tuple[ResolvedKind, ...]:
    """Expand CLI kind tokens into concrete search kinds.

    A bare ``ah2`` fans out over the gamma list and bare ``w-eh2``/``w-eh3``
    over the weight list; an inline value like ``ah2:0.7`` or ``w-eh2:1.1``
    pins one cell instead.
    """
    out: list[ResolvedKind] = []
    for token in tokens:
        name, _, arg = token.partition(":")
        if name in ("dijkstra", "zero", "eh1", "eh2", "eh3", "ah1"):
            if arg:
                raise ValueError(f"kind {name!r} takes no parameter")
            label = "dijkstra" if name in ("dijkstra", "zero") else name
            variant = "zero" if label == "dijkstra" else label
            out.append(ResolvedKind(label, "", HeuristicKind(variant)))
        elif name == "ah2":
            values = [float(arg)] if arg else list(gammas)
            for g in values:
                out.append(ResolvedKind("ah2", format(g, "g"),
                                        HeuristicKind("ah2", gamma=g)))
        elif name in ("w-eh2", "w-eh3"):
            values = [float(arg)] if arg else list(weights)
            for w in values:
                out.append(ResolvedKind(name, format(w, "g"),
                                        HeuristicKind("weighted", weight=w,
                                                      base=name[2:])))
        else:
            raise ValueError(
                f"unknown kind {token!r}; choose from dijkstra, eh1, eh2, eh3, "
                f"ah1, ah2[:gamma], w-eh2[:weight], w-eh3[:weight]")
    return tuple(out)


def _load_source(source: str, seed: int) -> Instance:
    """A source is either an instance file path or a family name like Q-9-BAL."""
    if os.path.exists(source) or source.endswith(".json"):
        return load(source)
    return generate(parse_name(source, seed))


def _fmt(value: float, spec: str = ".10g") -> str:
    return format(float(value), spec)


def _gap_pct(value: float, best: float) -> float:
    gap = 100.0 * (value - best) / best
    return 0.0 if abs(gap) < 5e-7 else gap


def run_bench(config: RunConfig) -> BenchReport:
    """Run the instances-by-kinds matrix, one shared evaluation cache per instance."""
    rows: list[dict[str, str]] = []
    for source in config.sources:
        cells: list[dict[str, str]] = []
        values: dict[int, float] = {}
        done: dict[int, dict[str, str]] = {}
        try:
            inst = _load_source(source, config.seed)
            cache = EvaluationCache()
            start, _ = initial_state(inst, cache, config.node_limit,
                                     tol=config.tol)
            bounds = None
            if any(rk.kind.needs_bounds for rk in config.kinds):
                bounds = profit_bounds(inst, mode=config.bound_mode,
                                       m_min=len(open_stations(start)),
                                       cache=cache, tol=config.tol)
        except Exception as exc:  # noqa: BLE001 - each cell reports and moves on
            logger.warning("setup failed for %s: %s", source, exc)
            for rk in config.kinds:
                cells.append(_error_row(source, rk, config, exc))
            rows.extend(cells)
            continue
        for i, rk in enumerate(config.kinds):
            try:
                result = astar(inst, start, rk.kind, cache, bounds)
            except Exception as exc:  # noqa: BLE001
                logger.warning("%s / %s failed: %s", inst.name, rk.label, exc)
                cells.append(_error_row(inst.name, rk, config, exc,
                                        seed=inst.seed))
                continue
            values[i] = result.optimal_time
            done[i] = {
                "instance": inst.name,
                "kind": rk.label,
                "param": rk.param,
                "opt": _fmt(result.optimal_time),
                "gap_pct": "",
                "expanded": str(result.stats.expanded),
                "remaining": str(result.stats.remaining),
                "evaluations": str(result.stats.evaluations),
                "time_ms": _fmt(result.stats.wall_ms, ".3f"),
                "seed": str(inst.seed),
                "bound_mode": config.bound_mode,
            }
            cells.append(done[i])
        exact = [values[i] for i in values
                 if config.kinds[i].label in _EXACT_LABELS]
        if exact:
            best = min(exact)
            for i, cell in done.items():
                cell["gap_pct"] = _fmt(_gap_pct(values[i], best), ".6g")
        rows.extend(cells)
    return BenchReport(tuple(rows))


def _error_row(instance: str, rk: ResolvedKind, config: RunConfig,
               exc: Exception, seed: int | None = None) -> dict[str, str]:
    return {
        "instance": instance,
        "kind": rk.label,
        "param": rk.param,
        "opt": f"error:{type(exc).__name__}",
        "gap_pct": "",
        "expanded": "",
        "remaining": "",
        "evaluations": "",
        "time_ms": "",
        "seed": "" if seed is None else str(seed),
        "bound_mode": config.bound_mode,
    }


# --------------------------------------------------------------- subcommands


def cmd_gen(args: argparse.Namespace) -> int:
    layout = _LETTERS.get(args.layout, args.layout)
    spec = GenSpec(layout, args.size, args.balance, args.seed, args.spacing)
    inst = generate(spec)
    out = args.out or f"{spec.name}-s{spec.seed}.json"
    save(inst, out)
    print(f"{spec.name}: stations={inst.num_stations} layout={layout} "
          f"balance={spec.balance} seed={spec.seed} budget={inst.budget:g} -> {out}")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    tol = tolerance_from_env()
    token = args.kind
    if ":" not in token:
        if token == "ah2" and args.gamma is not None:
            token = f"ah2:{args.gamma}"
        elif token.startswith("w-") and args.weight is not None:
            token = f"{token}:{args.weight}"
    kinds = resolve_kinds([token], gammas=[0.5], weights=[1.1])
    config = RunConfig((args.instance,), kinds, args.bound_mode,
                       args.node_limit, args.out, args.seed, tol)
    inst = _load_source(args.instance, args.seed)
    cache = EvaluationCache()
    start, start_ev = initial_state(inst, cache, config.node_limit, tol=tol)
    rk = config.kinds[0]
    bounds = None
    if rk.kind.needs_bounds:
        bounds = profit_bounds(inst, mode=config.bound_mode,
                               m_min=len(open_stations(start)),
                               cache=cache, tol=tol)
    result = astar(inst, start, rk.kind, cache, bounds)
    print(f"instance {inst.name} (stations={inst.num_stations}, seed={inst.seed})")
    print(f"start state: {{{','.join(map(str, open_stations(start)))}}} "
          f"profit={start_ev.profit:.4f}/h cost={start_ev.acquisition_cost:.2f}")
    print(format_schedule(result))
    report = BenchReport((
        {"instance": inst.name, "kind": rk.label, "param": rk.param,
         "opt": _fmt(result.optimal_time), "gap_pct": "",
         "expanded": str(result.stats.expanded),
         "remaining": str(result.stats.remaining),
         "evaluations": str(result.stats.evaluations),
         "time_ms": _fmt(result.stats.wall_ms, ".3f"),
         "seed": str(inst.seed), "bound_mode": config.bound_mode},))
    report.write(sys.stdout)
    if config.out_path:
        with open(config.out_path, "w", encoding="utf-8") as fh:
            report.write(fh)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    tol = tolerance_from_env()
    sources: list[str] = []
    if args.names is not None:
        sources.extend(t for t in args.names.split(",") if t)
    if args.instances:
        sources.extend(t for t in args.instances.split(",") if t)
    if args.names is None and not args.instances:
        sources = list(NAMED_BENCHMARKS)
    kinds = resolve_kinds(
        [t for t in args.kinds.split(",") if t],
        gammas=[float(t) for t in args.gammas.split(",") if t],
        weights=[float(t) for t in args.weights.split(",") if t])
    config = RunConfig(tuple(sources), kinds, args.bound_mode,
                       args.node_limit, args.out, args.seed, tol)
    report = run_bench(config)
    if config.out_path:
        with open(config.out_path, "w", encoding="utf-8") as fh:
            report.write(fh)
        print(f"wrote {len(report.rows)} rows to {config.out_path}")
    else:
        report.write(sys.stdout)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    tol = tolerance_from_env()
    inst = _load_source(args.instance, args.seed)
    cache = EvaluationCache()
    start, _ = initial_state(inst, cache, args.node_limit, tol=tol)
    t0 = time.perf_counter()
    opt = oracle_enumerate(inst, start, cache)
    ms = (time.perf_counter() - t0) * 1e3
    print(f"instance {inst.name}: start "
          f"{{{','.join(map(str, open_stations(start)))}}} opt={_fmt(opt)} "
          f"({ms:.1f} ms, {cache.solves} evaluations)")
    return EXIT_OK


# --------------------------------------------------------------- arg parsing


def _float_in(lo: float, hi: float, what: str):
    def check(text: str) -> float:
        value = float(text)
        if not lo <= value <= hi:
            raise argparse.ArgumentTypeError(
                f"{what} must lie in [{lo:g}, {hi:g}], got {text}")
        return value
    return check


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleetplan",
        description="Investment schedules for station-based vehicle sharing.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log INFO detail to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate one instance file")
    gen.add_argument("--layout", required=True,
                     choices=sorted(_LETTERS) + list(LAYOUTS))
    gen.add_argument("--size", required=True, type=int)
    gen.add_argument("--balance", required=True, choices=BALANCES)
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--spacing", type=float, default=1.0)
    gen.add_argument("--out", default=None, help="output path (default <name>-s<seed>.json)")
    gen.set_defaults(func=cmd_gen)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", required=True,
                        help="instance file path or family name like Q-9-BAL")
    common.add_argument("--seed", type=int, default=1,
                        help="generation seed when --instance is a family name")
    common.add_argument("--node-limit", type=int, default=50_000,
                        help="search-tree cap for the start-state solve")

    solve = sub.add_parser("solve", parents=[common],
                           help="run one search kind and print the schedule")
    solve.add_argument("--kind", required=True,
                       help="dijkstra|eh1|eh2|eh3|ah1|ah2[:g]|w-eh2[:w]|w-eh3[:w]")
    solve.add_argument("--gamma", type=_float_in(0.0, 1.0, "gamma"), default=None)
    solve.add_argument("--weight", type=_float_in(1.0, 10.0, "weight"), default=None)
    solve.add_argument("--bound-mode", default="lp_relaxation",
                       choices=("lp_relaxation", "exact_milp"))
    solve.add_argument("--out", default=None, help="also write the stats row here")
    solve.set_defaults(func=cmd_solve)

    bench = sub.add_parser("bench", help="instances-by-kinds CSV sweep")
    bench.add_argument("--names", default=None,
                       help="comma-separated family names (default: all named benchmarks)")
    bench.add_argument("--instances", default=None,
                       help="comma-separated instance file paths")
    bench.add_argument("--kinds", default="dijkstra,eh1,eh2,eh3")
    bench.add_argument("--gammas", default="0.3,0.5,0.7",
                       help="fan-out values for bare ah2")
    bench.add_argument("--weights", default="1.05,1.1",
                       help="fan-out values for bare w-eh2 / w-eh3")
    bench.add_argument("--seed", type=int, default=1)
    bench.add_argument("--node-limit", type=int, default=50_000)
    bench.add_argument("--bound-mode", default="lp_relaxation",
                       choices=("lp_relaxation", "exact_milp"))
    bench.add_argument("--out", default=None, help="CSV path (default stdout)")
    bench.set_defaults(func=cmd_bench)

    oracle = sub.add_parser("oracle", parents=[common],
                            help="exact optimum by permutation enumeration")
    oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, InstanceParseError, InstanceValidationError,
            ConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NoScheduleError, BudgetError, UndefinedTransitionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SCHEDULE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
