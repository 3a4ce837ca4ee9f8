"""Benchmark instance generation and file I/O.

Layout geometry (spacing s, default 1 km), station order as listed:

* quadratic: a k x k grid with unit spacing s, row major, x varies fastest;
  requires a perfect-square station count with k >= 2.
* hexagonal: a station at the origin, then the first hex-lattice ring of 6
  at distance s (angles 0, 60, ..., 300 degrees); 19 stations add the second
  ring walked by ascending angle, alternating corner (distance 2s, angles
  0, 60, ...) and edge midpoint (distance sqrt(3) s, angles 30, 90, ...).
* circular: a station at the origin plus 6 equally spaced on radius s;
  19 stations add 12 equally spaced on radius 2s starting at angle 0.

Randomness comes from numpy's PCG64 seeded with the sequence
(seed, station count, layout code, balance code), so sibling families with
identical geometry (circular 7 and hexagonal 7) still draw distinct data.
Draws are consumed in a fixed order: one uniform per station for demand,
ascending index, then one uniform per station for the opening cost.

Demand model: station i emits trips at a total rate of 80 + 40 u_i per hour
when balanced. In the imbalanced variant, stations whose distance to the
coordinate centroid is at most the median such distance count as central and
emit 110 + 30 u_i, the rest 60 + 30 u_i. Trips split evenly over the other
stations. Travel time is 3 minutes of overhead plus distance at 25 km/h; the
return rate is its reciprocal. Trip margin and rebalancing cost are both
0.30 $/km, opening a station costs 1000 + 2000 v_i, a vehicle costs 1, the
minimum served fraction is 0.5, and the budget is 10000 for ten or more
stations, else 500 per station.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import InstanceParseError, InstanceValidationError

LAYOUTS = ("circular", "hexagonal", "quadratic")
BALANCES = ("BAL", "IMB")
_LAYOUT_LETTER = {"circular": "C", "hexagonal": "H", "quadratic": "Q"}
_LETTER_LAYOUT = {v: k for k, v in _LAYOUT_LETTER.items()}

NAMED_BENCHMARKS = (
    "C-7-BAL", "H-7-BAL", "Q-9-BAL", "Q-16-BAL", "Q-16-IMB",
    "C-19-BAL", "C-19-IMB", "H-19-BAL", "H-19-IMB", "Q-25-BAL", "Q-25-IMB",
)

_JSON_FIELDS = ("stations", "coords", "lambda", "mu", "margin", "rebalance_cost",
                "station_cost", "vehicle_cost", "service_level", "budget",
                "name", "seed")


@dataclass(frozen=True, eq=False)
class Instance:
    """One scheduling problem: geometry, demand, economics, and budget."""

    num_stations: int
    coords: np.ndarray
    arrival_rate: np.ndarray
    return_rate: np.ndarray
    margin: np.ndarray
    rebalance_cost: np.ndarray
    station_cost: np.ndarray
    vehicle_cost: float
    service_level: float
    budget: float
    name: str
    seed: int

    def __post_init__(self) -> None:
        n = self.num_stations
        conv = {
            "coords": (np.asarray(self.coords, dtype=np.float64), (n, 2)),
            "arrival_rate": (np.asarray(self.arrival_rate, dtype=np.float64), (n, n)),
            "return_rate": (np.asarray(self.return_rate, dtype=np.float64), (n, n)),
            "margin": (np.asarray(self.margin, dtype=np.float64), (n, n)),
            "rebalance_cost": (np.asarray(self.rebalance_cost, dtype=np.float64), (n, n)),
            "station_cost": (np.asarray(self.station_cost, dtype=np.float64), (n,)),
        }
        for fname, (arr, shape) in conv.items():
            if arr.shape != shape:
                raise InstanceValidationError(
                    f"{fname}: expected shape {shape}, got {arr.shape}")
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, fname, arr)
        lam, mu = self.arrival_rate, self.return_rate
        if np.any(np.diag(lam) != 0.0):
            raise InstanceValidationError("lambda: diagonal entries must be 0")
        if np.any(lam < 0.0):
            raise InstanceValidationError("lambda: negative arrival rate")
        off = ~np.eye(n, dtype=bool)
        if np.any(mu[off] <= 0.0):
            raise InstanceValidationError("mu: off-diagonal rates must be positive")
        if np.any(self.margin < 0.0):
            raise InstanceValidationError("margin: negative entry")
        if np.any(self.rebalance_cost < 0.0):
            raise InstanceValidationError("rebalance_cost: negative entry")
        if np.any(self.station_cost <= 0.0):
            raise InstanceValidationError("station_cost: entries must be positive")
        if self.vehicle_cost <= 0.0:
            raise InstanceValidationError("vehicle_cost: must be positive")
        if not 0.0 < self.service_level < 1.0:
            raise InstanceValidationError("service_level: must lie in (0, 1)")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        scalars = ("num_stations", "vehicle_cost", "service_level",
                   "budget", "name", "seed")
        arrays = ("coords", "arrival_rate", "return_rate", "margin",
                  "rebalance_cost", "station_cost")
        return all(getattr(self, f) == getattr(other, f) for f in scalars) and \
            all(np.array_equal(getattr(self, f), getattr(other, f)) for f in arrays)


@dataclass(frozen=True)
class GenSpec:
    """Recipe for one benchmark instance."""

    layout: str
    num_stations: int
    balance: str
    seed: int
    spacing: float = 1.0

    def __post_init__(self) -> None:
        if self.layout not in LAYOUTS:
            raise ValueError(f"layout must be one of {LAYOUTS}, got {self.layout!r}")
        if self.balance not in BALANCES:
            raise ValueError(f"balance must be one of {BALANCES}, got {self.balance!r}")
        if self.num_stations < 2:
            raise ValueError("need at least 2 stations")
        if not self.spacing > 0.0:
            raise ValueError("spacing must be positive")

    @property
    def name(self) -> str:
        return f"{_LAYOUT_LETTER[self.layout]}-{self.num_stations}-{self.balance}"


def parse_name(name: str, seed: int = 1, spacing: float = 1.0) -> GenSpec:
    """Turn a family name like Q-16-IMB into a GenSpec."""
    parts = name.split("-")
    if len(parts) != 3 or parts[0] not in _LETTER_LAYOUT:
        raise ValueError(f"instance name {name!r} is not of the form C|H|Q-<count>-BAL|IMB")
    try:
        count = int(parts[1])
    except ValueError:
        raise ValueError(f"instance name {name!r} has a non-integer station count") from None
    return GenSpec(_LETTER_LAYOUT[parts[0]], count, parts[2], seed, spacing)


def _ring(radius: float, count: int, phase: float = 0.0) -> list[tuple[float, float]]:
    pts = []
    for k in range(count):
        ang = phase + 2.0 * math.pi * k / count
        pts.append((radius * math.cos(ang), radius * math.sin(ang)))
    return pts


def _layout_coords(spec: GenSpec) -> np.ndarray:
    s, n = spec.spacing, spec.num_stations
    if spec.layout == "quadratic":
        k = math.isqrt(n)
        if k * k != n or k < 2:
            raise ValueError(
                f"quadratic layout needs a perfect-square station count >= 4, got {n}")
        pts = [(s * (i % k), s * (i // k)) for i in range(n)]
    elif spec.layout == "hexagonal":
        if n not in (7, 19):
            raise ValueError(f"hexagonal layout supports 7 or 19 stations, got {n}")
        pts = [(0.0, 0.0)] + _ring(s, 6)
        if n == 19:
            # second lattice ring, ascending angle: corner, midpoint, corner, ...
            for k in range(6):
                ang = math.pi * k / 3.0
                pts.append((2.0 * s * math.cos(ang), 2.0 * s * math.sin(ang)))
                mid = ang + math.pi / 6.0
                r = math.sqrt(3.0) * s
                pts.append((r * math.cos(mid), r * math.sin(mid)))
    else:
        if n not in (7, 19):
            raise ValueError(f"circular layout supports 7 or 19 stations, got {n}")
        pts = [(0.0, 0.0)] + _ring(s, 6)
        if n == 19:
            pts.extend(_ring(2.0 * s, 12))
    return np.asarray(pts, dtype=np.float64)


def generate(spec: GenSpec) -> Instance:
    """Deterministically build the instance described by spec."""
    n = spec.num_stations
    coords = _layout_coords(spec)
    ss = np.random.SeedSequence(
        [spec.seed, n, LAYOUTS.index(spec.layout), BALANCES.index(spec.balance)])
    rng = np.random.Generator(np.random.PCG64(ss))
    u_rate = rng.random(n)
    u_cost = rng.random(n)

    if spec.balance == "BAL":
        total_rate = 80.0 + 40.0 * u_rate
    else:
        centroid = coords.mean(axis=0)
        dist_c = np.hypot(*(coords - centroid).T)
        central = dist_c <= np.median(dist_c)
        total_rate = np.where(central, 110.0 + 30.0 * u_rate, 60.0 + 30.0 * u_rate)

    off = ~np.eye(n, dtype=bool)
    lam = np.where(off, total_rate[:, None] / (n - 1), 0.0)
    diff = coords[:, None, :] - coords[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    mu = 1.0 / (3.0 / 60.0 + dist / 25.0)
    return Instance(
        num_stations=n,
        coords=coords,
        arrival_rate=lam,
        return_rate=mu,
        margin=0.3 * dist,
        rebalance_cost=0.3 * dist,
        station_cost=1000.0 + 2000.0 * u_cost,
        vehicle_cost=1.0,
        service_level=0.5,
        budget=10000.0 if n >= 10 else 500.0 * n,
        name=spec.name,
        seed=spec.seed,
    )


def save(instance: Instance, path: str | os.PathLike) -> None:
    """Write the documented JSON document; floats keep full precision."""
    doc = {
        "stations": instance.num_stations,
        "coords": instance.coords.tolist(),
        "lambda": instance.arrival_rate.tolist(),
        "mu": instance.return_rate.tolist(),
        "margin": instance.margin.tolist(),
        "rebalance_cost": instance.rebalance_cost.tolist(),
        "station_cost": instance.station_cost.tolist(),
        "vehicle_cost": instance.vehicle_cost,
        "service_level": instance.service_level,
        "budget": instance.budget,
        "name": instance.name,
        "seed": instance.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load(path: str | os.PathLike) -> Instance:
    """Read an instance document, validating structure and invariants."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InstanceParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from exc
    if not isinstance(doc, dict):
        raise InstanceParseError(f"{path}: top level must be an object")
    missing = [k for k in _JSON_FIELDS if k not in doc]
    if missing:
        raise InstanceParseError(f"{path}: missing field(s) {', '.join(missing)}")
    try:
        return Instance(
            num_stations=int(doc["stations"]),
            coords=doc["coords"],
            arrival_rate=doc["lambda"],
            return_rate=doc["mu"],
            margin=doc["margin"],
            rebalance_cost=doc["rebalance_cost"],
            station_cost=doc["station_cost"],
            vehicle_cost=float(doc["vehicle_cost"]),
            service_level=float(doc["service_level"]),
            budget=float(doc["budget"]),
            name=str(doc["name"]),
            seed=int(doc["seed"]),
        )
    except (TypeError, ValueError) as exc:
        raise InstanceParseError(f"{path}: malformed field value ({exc})") from exc
