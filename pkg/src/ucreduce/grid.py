"""Static power-system data model: buses, branches, generators.

Systems are stored as a small JSON document::

    {"n_periods": 24, "reference_bus": 1,
     "buses": [{"id": 1, "base_demand": [...]}, ...],
     "branches": [{"id": 1, "from": 1, "to": 2, "reactance": 0.1, "flow_limit": 200.0}, ...],
     "generators": [{"id": 1, "bus": 1, "p_min": ..., "p_max": ..., "ramp_hourly": ...,
                     "ramp_10min": ..., "cost_energy": ..., "cost_noload": ...,
                     "cost_startup": ..., "initial_status": 0}, ...]}

An optional top-level ``"reserve_requirement"`` flag (default ``true``)
switches the loss-of-unit reserve rows off for toy systems.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError, ValidationError


def _frozen(values, ndim):
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Bus:
    id: int
    base_demand: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base_demand", _frozen(self.base_demand, 1))

    def __eq__(self, other):
        if not isinstance(other, Bus):
            return NotImplemented
        return self.id == other.id and bool(np.array_equal(self.base_demand, other.base_demand))

    __hash__ = None


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    reactance: float
    flow_limit: float


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    ramp_hourly: float
    ramp_10min: float
    cost_energy: float
    cost_noload: float
    cost_startup: float
    initial_status: int = 0


@dataclass(frozen=True)
class DemandProfile:
    """Nodal demand, one row per bus (system order), one column per period."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values, 2)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("demand entries must be finite and >= 0")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self):
        return self.values.shape

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, DemandProfile):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class GridSystem:
    buses: tuple
    branches: tuple
    generators: tuple
    reference_bus: int
    n_periods: int
    reserve_requirement: bool = True
    _bus_pos: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "generators", tuple(self.generators))
        validate(self)
        object.__setattr__(self, "_bus_pos", {b.id: i for i, b in enumerate(self.buses)})

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    def bus_index(self, bus_id: int) -> int:
        return self._bus_pos[bus_id]

    def to_dict(self) -> dict:
        out = {
            "n_periods": self.n_periods,
            "reference_bus": self.reference_bus,
        }
        if not self.reserve_requirement:
            out["reserve_requirement"] = False
        out["buses"] = [
            {"id": b.id, "base_demand": [float(v) for v in b.base_demand]} for b in self.buses
        ]
        out["branches"] = [
            {
                "id": br.id,
                "from": br.from_bus,
                "to": br.to_bus,
                "reactance": float(br.reactance),
                "flow_limit": float(br.flow_limit),
            }
            for br in self.branches
        ]
        out["generators"] = [
            {
                "id": g.id,
                "bus": g.bus,
                "p_min": float(g.p_min),
                "p_max": float(g.p_max),
                "ramp_hourly": float(g.ramp_hourly),
                "ramp_10min": float(g.ramp_10min),
                "cost_energy": float(g.cost_energy),
                "cost_noload": float(g.cost_noload),
                "cost_startup": float(g.cost_startup),
                "initial_status": int(g.initial_status),
            }
            for g in self.generators
        ]
        return out

    def __eq__(self, other):
        if not isinstance(other, GridSystem):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def validate(system: GridSystem) -> None:
    """Check every invariant of ``system``; raise ValidationError naming the field."""
    if not isinstance(system.n_periods, int) or system.n_periods < 1:
        raise ValidationError(f"n_periods must be an integer >= 1, got {system.n_periods!r}")
    if not system.buses:
        raise ValidationError("buses: at least one bus is required")
    bus_ids = [b.id for b in system.buses]
    if len(set(bus_ids)) != len(bus_ids):
        raise ValidationError("buses: duplicate bus id")
    known = set(bus_ids)
    for b in system.buses:
        if b.base_demand.shape != (system.n_periods,):
            raise ValidationError(
                f"bus {b.id}: base_demand has length {b.base_demand.size}, expected {system.n_periods}"
            )
        if not np.all(np.isfinite(b.base_demand)) or np.any(b.base_demand < 0):
            raise ValidationError(f"bus {b.id}: base_demand entries must be >= 0")
    if system.reference_bus not in known:
        raise ValidationError(f"reference_bus {system.reference_bus} does not exist")

    br_ids = [br.id for br in system.branches]
    if len(set(br_ids)) != len(br_ids):
        raise ValidationError("branches: duplicate branch id")
    for br in system.branches:
        if br.from_bus not in known or br.to_bus not in known:
            raise ValidationError(f"branch {br.id}: endpoint bus does not exist")
        if br.from_bus == br.to_bus:
            raise ValidationError(f"branch {br.id}: from and to bus are equal")
        if not (math.isfinite(br.reactance) and br.reactance > 0):
            raise ValidationError(f"branch {br.id}: reactance must be > 0")
        if not (math.isfinite(br.flow_limit) and br.flow_limit > 0):
            raise ValidationError(f"branch {br.id}: flow_limit must be > 0")

    if not system.generators:
        raise ValidationError("generators: at least one generator is required")
    gen_ids = [g.id for g in system.generators]
    if len(set(gen_ids)) != len(gen_ids):
        raise ValidationError("generators: duplicate generator id")
    for g in system.generators:
        if g.bus not in known:
            raise ValidationError(f"generator {g.id}: bus {g.bus} does not exist")
        for name in ("p_min", "p_max", "ramp_hourly", "ramp_10min",
                     "cost_energy", "cost_noload", "cost_startup"):
            value = getattr(g, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError(f"generator {g.id}: {name} must be finite and >= 0")
        if g.p_min > g.p_max:
            raise ValidationError(f"generator {g.id}: p_min exceeds p_max")
        if g.initial_status not in (0, 1):
            raise ValidationError(f"generator {g.id}: initial_status must be 0 or 1")

    capacity = sum(g.p_max for g in system.generators)
    peak = max(float(np.sum([b.base_demand[t] for b in system.buses])) for t in range(system.n_periods))
    if capacity < peak:
        raise ValidationError(
            f"generators: total p_max {capacity} below peak base demand {peak}"
        )


def _require(obj, key, where):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise ValidationError(f"{where}: missing field '{key}'") from None


def _number(obj, key, where):
    value = _require(obj, key, where)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{where}: field '{key}' must be a number")
    return float(value)


def _integer(obj, key, where):
    value = _require(obj, key, where)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{where}: field '{key}' must be an integer")
    return value


def system_from_dict(doc: dict) -> GridSystem:
    if not isinstance(doc, dict):
        raise ParseError("system document must be a JSON object")
    n_periods = _integer(doc, "n_periods", "system")
    buses = []
    for raw in _require(doc, "buses", "system"):
        bid = _integer(raw, "id", "bus")
        demand = _require(raw, "base_demand", f"bus {bid}")
        if not isinstance(demand, list):
            raise ValidationError(f"bus {bid}: base_demand must be a list")
        buses.append(Bus(bid, [float(v) for v in demand]))
    branches = []
    for raw in doc.get("branches", []):
        brid = _integer(raw, "id", "branch")
        where = f"branch {brid}"
        branches.append(
            Branch(
                brid,
                _integer(raw, "from", where),
                _integer(raw, "to", where),
                _number(raw, "reactance", where),
                _number(raw, "flow_limit", where),
            )
        )
    generators = []
    for raw in _require(doc, "generators", "system"):
        gid = _integer(raw, "id", "generator")
        where = f"generator {gid}"
        generators.append(
            Generator(
                gid,
                _integer(raw, "bus", where),
                *(_number(raw, k, where) for k in (
                    "p_min", "p_max", "ramp_hourly", "ramp_10min",
                    "cost_energy", "cost_noload", "cost_startup")),
                initial_status=int(raw.get("initial_status", 0)),
            )
        )
    reserve = doc.get("reserve_requirement", True)
    if not isinstance(reserve, bool):
        raise ValidationError("system: reserve_requirement must be a boolean")
    return GridSystem(
        buses, branches, generators,
        reference_bus=_integer(doc, "reference_bus", "system"),
        n_periods=n_periods,
        reserve_requirement=reserve,
    )


def load_system(path) -> GridSystem:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return system_from_dict(doc)


def save_system(system: GridSystem, path) -> None:
    Path(path).write_text(json.dumps(system.to_dict(), indent=2) + "\n")


def bundled_system_path(name: str = "six_bus.json") -> Path:
    return Path(str(resources.files("ucreduce") / "data" / name))


def load_bundled(name: str = "six_bus.json") -> GridSystem:
    return load_system(bundled_system_path(name))


def base_profile(system: GridSystem) -> DemandProfile:
    return DemandProfile(np.vstack([b.base_demand for b in system.buses]))


def check_profile(system: GridSystem, profile: DemandProfile) -> None:
    if profile.shape != (system.n_buses, system.n_periods):
        raise DimensionMismatch(
            f"profile shape {profile.shape} does not match system "
            f"({system.n_buses}, {system.n_periods})"
        )


def save_profile_csv(system: GridSystem, profile: DemandProfile, path) -> None:
    check_profile(system, profile)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for bus, row in zip(system.buses, profile.values):
            writer.writerow([bus.id] + [repr(float(v)) for v in row])


def load_profile_csv(system: GridSystem, path) -> DemandProfile:
    rows = {}
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec:
                continue
            try:
                bid = int(rec[0])
                rows[bid] = [float(v) for v in rec[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    missing = [b.id for b in system.buses if b.id not in rows]
    if missing or len(rows) != system.n_buses:
        raise DimensionMismatch(f"{path}: bus rows do not match the system (missing {missing})")
    profile = DemandProfile([rows[b.id] for b in system.buses])
    check_profile(system, profile)
    return profile
