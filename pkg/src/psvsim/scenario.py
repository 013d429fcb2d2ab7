"""Declarative scenario files: schema, validation, and the bundled corpus.

A scenario is one JSON document that assembles the plant (network, fleet,
storage, load roster), the mission, an irradiance timeline, a contingency
event list and the simulation parameters.  The schema is stable; the bundled
corpus covers every contingency case of the reference study plus a steady
station-keeping baseline.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

from .dispatch import DEFAULT_RESERVE_KW, GenUnit, standard_fleet
from .grid import Branch, Bus, NetworkModel, build_network, isolate_buses, standard_network
from .loads import LOAD_CLASSES, LoadUnit, MISSIONS, mission_profile, shed_plan, standard_loads
from .powertrain import SfocMap, default_sfoc_map, load_sfoc_map
from .storage import BatteryPack, EssUnit

SCHEMA_VERSION = 1

EVENT_KINDS = (
    "load-step",
    "bus-isolation",
    "ess-unavailable",
    "gen-trip",
    "mission-change",
    "shed-approval",
)

_TOP_LEVEL_KEYS = {
    "schema_version", "name", "description", "network", "fleet", "loads",
    "mission", "irradiance", "events", "sim", "dispatch",
}


class ScenarioError(ValueError):
    """Scenario failed validation; ``errors`` lists field diagnostics."""

    def __init__(self, errors: Iterable[str]):
        self.errors = tuple(errors)
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimParams:
    dt: float = 1e-3                 # s, fixed step
    schedule_period: float = 0.5     # s, dispatch cadence
    duration: float = 5.0            # s of simulated time
    partitions: int = 1
    seed: int = 0
    pace: float = 0.0                # wall-clock scale; 0 = free-run
    decimation: int = 1              # trace keeps every n-th step


@dataclass(frozen=True)
class ContingencyEvent:
    at: float
    kind: str
    payload: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.at < 0:
            raise ValueError("event time must be non-negative")
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class Scenario:
    name: str
    network: NetworkModel
    fleet: tuple[GenUnit, ...]
    ess: EssUnit | None
    loads: tuple[LoadUnit, ...]
    mission: str
    irradiance: tuple[tuple[float, float], ...]   # (t s, W/m^2) breakpoints
    events: tuple[ContingencyEvent, ...]
    sim: SimParams
    reserve_kw: float = DEFAULT_RESERVE_KW
    grid_allows_fast: bool = False
    sfoc_map: SfocMap = field(default_factory=default_sfoc_map, repr=False)
    description: str = ""


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _check_number(raw: Mapping[str, Any], key: str, errors: list[str],
                  *, where: str, lo: float | None = None,
                  hi: float | None = None) -> float | None:
    val = raw.get(key)
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        errors.append(f"{where}.{key}: expected a number, got {val!r}")
        return None
    if lo is not None and val < lo:
        errors.append(f"{where}.{key}: {val} below the minimum {lo}")
        return None
    if hi is not None and val > hi:
        errors.append(f"{where}.{key}: {val} above the maximum {hi}")
        return None
    return float(val)


def validate_scenario(raw: Mapping[str, Any]) -> tuple[list[str], list[str]]:
    """Schema and cross-reference checks.  Returns (warnings, errors);
    an empty error list means the document loads."""
    warnings: list[str] = []
    errors: list[str] = []

    if not isinstance(raw, Mapping):
        return warnings, ["document: expected a mapping at the top level"]

    for key in raw:
        if key not in _TOP_LEVEL_KEYS:
            warnings.append(f"document: unknown key {key!r} ignored")

    if raw.get("schema_version") != SCHEMA_VERSION:
        errors.append(
            f"schema_version: expected {SCHEMA_VERSION}, "
            f"got {raw.get('schema_version')!r}")
    if not isinstance(raw.get("name"), str) or not raw.get("name"):
        errors.append("name: required non-empty string")

    # network ---------------------------------------------------------------
    net_raw = raw.get("network", "standard")
    bus_ids: set[str] = set()
    if net_raw == "standard":
        bus_ids = {b.id for b in standard_network().buses}
    elif isinstance(net_raw, Mapping):
        buses = net_raw.get("buses")
        branches = net_raw.get("branches")
        if not isinstance(buses, list) or not buses:
            errors.append("network.buses: required non-empty list")
        else:
            for k, b in enumerate(buses):
                if not isinstance(b, Mapping) or "id" not in b:
                    errors.append(f"network.buses[{k}]: needs an 'id'")
                else:
                    bus_ids.add(str(b["id"]))
        if not isinstance(branches, list):
            errors.append("network.branches: required list")
        else:
            for k, br in enumerate(branches):
                if not isinstance(br, Mapping):
                    errors.append(f"network.branches[{k}]: expected a mapping")
                    continue
                for fld in ("id", "from", "to", "r"):
                    if fld not in br:
                        errors.append(f"network.branches[{k}]: missing {fld!r}")
                if br.get("from") not in bus_ids or br.get("to") not in bus_ids:
                    errors.append(
                        f"network.branches[{k}]: endpoint not a declared bus")
    else:
        errors.append("network: expected 'standard' or a bus/branch mapping")

    # fleet -----------------------------------------------------------------
    fleet_raw = raw.get("fleet", {})
    gen_ids: set[str] = set()
    if not isinstance(fleet_raw, Mapping):
        errors.append("fleet: expected a mapping")
        fleet_raw = {}
    gens_raw = fleet_raw.get("gens", "standard")
    if gens_raw == "standard":
        gen_ids = {g.id for g in standard_fleet()}
        if bus_ids and not {"B1", "B2"} <= bus_ids:
            errors.append("fleet.gens: standard fleet needs buses B1 and B2")
    elif isinstance(gens_raw, list):
        for k, g in enumerate(gens_raw):
            if not isinstance(g, Mapping) or "id" not in g or "bus" not in g:
                errors.append(f"fleet.gens[{k}]: needs 'id' and 'bus'")
                continue
            gen_ids.add(str(g["id"]))
            if bus_ids and g["bus"] not in bus_ids:
                errors.append(f"fleet.gens[{k}]: unknown bus {g['bus']!r}")
    else:
        errors.append("fleet.gens: expected 'standard' or a list")
    ess_raw = fleet_raw.get("ess")
    if ess_raw is not None:
        if not isinstance(ess_raw, Mapping):
            errors.append("fleet.ess: expected a mapping or null")
        else:
            _check_number(ess_raw, "soc", errors, where="fleet.ess",
                          lo=0.0, hi=1.0)
            if "bus" in ess_raw and bus_ids and ess_raw["bus"] not in bus_ids:
                errors.append(f"fleet.ess.bus: unknown bus {ess_raw['bus']!r}")
            if "f_p" in ess_raw and ess_raw["f_p"] is not None:
                _check_number(ess_raw, "f_p", errors, where="fleet.ess", lo=0.0)
    calibration = fleet_raw.get("calibration", "default")
    if calibration != "default" and not isinstance(calibration, str):
        errors.append("fleet.calibration: expected 'default' or a file path")

    # loads -----------------------------------------------------------------
    loads_raw = raw.get("loads", {})
    load_ids: set[str] = set()
    load_signs: dict[str, float] = {}
    if not isinstance(loads_raw, Mapping):
        errors.append("loads: expected a mapping")
        loads_raw = {}
    roster_raw = loads_raw.get("roster", "standard")
    if roster_raw == "standard":
        load_ids = {u.id for u in standard_loads()}
    elif isinstance(roster_raw, list):
        for k, u in enumerate(roster_raw):
            if not isinstance(u, Mapping):
                errors.append(f"loads.roster[{k}]: expected a mapping")
                continue
            for fld in ("id", "bus", "cls", "rated"):
                if fld not in u:
                    errors.append(f"loads.roster[{k}]: missing {fld!r}")
            if u.get("cls") is not None and u.get("cls") not in LOAD_CLASSES:
                errors.append(
                    f"loads.roster[{k}]: unknown class {u.get('cls')!r}")
            if "id" in u:
                load_ids.add(str(u["id"]))
            if bus_ids and u.get("bus") not in bus_ids:
                errors.append(f"loads.roster[{k}]: unknown bus {u.get('bus')!r}")
    else:
        errors.append("loads.roster: expected 'standard' or a list")
    setpoints = loads_raw.get("setpoints", {})
    if not isinstance(setpoints, Mapping):
        errors.append("loads.setpoints: expected a mapping of id -> kW")
    else:
        for lid, val in setpoints.items():
            if lid not in load_ids:
                errors.append(f"loads.setpoints: unknown load {lid!r}")
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                errors.append(f"loads.setpoints.{lid}: expected a number")
            elif val > 0:
                errors.append(
                    f"loads.setpoints.{lid}: consumption is non-positive, "
                    f"got {val}")
            else:
                load_signs[str(lid)] = float(val)

    # mission ---------------------------------------------------------------
    mission = raw.get("mission")
    if mission not in MISSIONS:
        errors.append(
            f"mission: expected one of {sorted(MISSIONS)}, got {mission!r}")

    # irradiance ------------------------------------------------------------
    irr = raw.get("irradiance", [])
    if not isinstance(irr, list):
        errors.append("irradiance: expected a list of [t, W/m^2] pairs")
    else:
        last_t = None
        for k, pair in enumerate(irr):
            if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                    or not all(isinstance(v, (int, float)) for v in pair)):
                errors.append(f"irradiance[{k}]: expected [t, W/m^2]")
                continue
            t, g = pair
            if g < 0:
                errors.append(f"irradiance[{k}]: negative irradiance")
            if last_t is not None and t <= last_t:
                errors.append(f"irradiance[{k}]: breakpoints must increase in t")
            last_t = t
        if irr and ess_raw is None:
            warnings.append(
                "irradiance: timeline given but no storage unit is fitted")

    # events ----------------------------------------------------------------
    events = raw.get("events", [])
    if not isinstance(events, list):
        errors.append("events: expected a list")
        events = []
    for k, ev in enumerate(events):
        where = f"events[{k}]"
        if not isinstance(ev, Mapping):
            errors.append(f"{where}: expected a mapping")
            continue
        kind = ev.get("kind")
        if kind not in EVENT_KINDS:
            errors.append(f"{where}.kind: unknown kind {kind!r}")
            continue
        _check_number(ev, "at", errors, where=where, lo=0.0)
        payload = ev.get("payload", {})
        if not isinstance(payload, Mapping):
            errors.append(f"{where}.payload: expected a mapping")
            continue
        if kind == "load-step":
            for lid, val in payload.items():
                if lid not in load_ids:
                    errors.append(f"{where}.payload: unknown load {lid!r}")
                elif not isinstance(val, (int, float)) or val > 0:
                    errors.append(
                        f"{where}.payload.{lid}: expected kW <= 0")
        elif kind == "bus-isolation":
            buses = payload.get("buses")
            if not isinstance(buses, list) or not buses:
                errors.append(f"{where}.payload.buses: required list")
            else:
                for b in buses:
                    if bus_ids and b not in bus_ids:
                        errors.append(f"{where}.payload.buses: unknown {b!r}")
        elif kind == "gen-trip":
            units = payload.get("units")
            if not isinstance(units, list) or not units:
                errors.append(f"{where}.payload.units: required list")
            else:
                for u in units:
                    if u not in gen_ids:
                        errors.append(f"{where}.payload.units: unknown {u!r}")
        elif kind == "mission-change":
            if payload.get("mission") not in MISSIONS:
                errors.append(
                    f"{where}.payload.mission: expected one of "
                    f"{sorted(MISSIONS)}")
        elif kind == "ess-unavailable":
            if ess_raw is None:
                warnings.append(
                    f"{where}: storage outage queued but no unit is fitted")
        elif kind == "shed-approval":
            _check_number(payload, "deficit_kw", errors, where=f"{where}.payload",
                          lo=0.0)

    # sim parameters ----------------------------------------------------------
    sim_raw = raw.get("sim", {})
    if not isinstance(sim_raw, Mapping):
        errors.append("sim: expected a mapping")
        sim_raw = {}
    dt = _check_number(sim_raw, "dt", errors, where="sim", lo=1e-5) \
        if "dt" in sim_raw else SimParams.dt
    period = _check_number(sim_raw, "schedule_period", errors, where="sim",
                           lo=1e-3) if "schedule_period" in sim_raw \
        else SimParams.schedule_period
    if "duration" in sim_raw:
        duration = _check_number(sim_raw, "duration", errors, where="sim",
                                 lo=0.0)
        if duration == 0.0:
            warnings.append("sim.duration: zero duration is a validation-only run")
    if dt is not None and period is not None and dt > period:
        errors.append("sim.dt: the step cannot exceed the schedule period")
    if "partitions" in sim_raw:
        parts = sim_raw.get("partitions")
        if not isinstance(parts, int) or isinstance(parts, bool) or parts < 1:
            errors.append("sim.partitions: expected an integer >= 1")
    if "seed" in sim_raw and not isinstance(sim_raw["seed"], int):
        errors.append("sim.seed: expected an integer")
    if "pace" in sim_raw:
        pace = _check_number(sim_raw, "pace", errors, where="sim", lo=0.0)
        if pace:
            warnings.append("sim.pace: wall-clock pacing enabled")
    if "decimation" in sim_raw:
        dec = sim_raw.get("decimation")
        if not isinstance(dec, int) or isinstance(dec, bool) or dec < 1:
            errors.append("sim.decimation: expected an integer >= 1")

    # dispatch policy -----------------------------------------------------------
    disp_raw = raw.get("dispatch", {})
    if not isinstance(disp_raw, Mapping):
        errors.append("dispatch: expected a mapping")
    else:
        if "reserve_kw" in disp_raw:
            _check_number(disp_raw, "reserve_kw", errors, where="dispatch",
                          lo=0.0)
        if "grid_allows_fast" in disp_raw and not isinstance(
                disp_raw["grid_allows_fast"], bool):
            errors.append("dispatch.grid_allows_fast: expected a boolean")

    return warnings, errors


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------


def _build_network_section(net_raw: Any) -> NetworkModel:
    if net_raw == "standard":
        return standard_network()
    buses = tuple(
        Bus(id=str(b["id"]), kind=b.get("kind", "load"),
            p_max=float(b.get("p_max", 0.0)), p_min=float(b.get("p_min", 0.0)),
            q_rating=b.get("q_rating"))
        for b in net_raw["buses"])
    branches = tuple(
        Branch(id=str(br["id"]), from_bus=str(br["from"]), to_bus=str(br["to"]),
               r=float(br["r"]), x=br.get("x"),
               rating=float(br.get("rating", 4096.0)))
        for br in net_raw["branches"])
    return build_network(buses, branches)


def _build_fleet_section(fleet_raw: Mapping[str, Any]) \
        -> tuple[tuple[GenUnit, ...], EssUnit | None, SfocMap]:
    gens_raw = fleet_raw.get("gens", "standard")
    if gens_raw == "standard":
        gens = standard_fleet()
    else:
        gens = tuple(
            GenUnit(id=str(g["id"]), bus=str(g["bus"]),
                    p_rated=float(g.get("p_rated", 2048.0)),
                    online=bool(g.get("online", True)))
            for g in gens_raw)
    ess_raw = fleet_raw.get("ess")
    ess = None
    if ess_raw is not None:
        battery = BatteryPack(soc=float(ess_raw.get("soc", 1.0)))
        ess = EssUnit(
            battery=battery,
            p_rating=float(ess_raw.get("p_rating", 820.0)),
            bus=str(ess_raw.get("bus", "B14")),
            f_p=(float(ess_raw["f_p"])
                 if ess_raw.get("f_p") is not None else None),
        )
    calibration = fleet_raw.get("calibration", "default")
    smap = default_sfoc_map() if calibration == "default" \
        else load_sfoc_map(calibration)
    return gens, ess, smap


def _build_loads_section(loads_raw: Mapping[str, Any]) -> tuple[LoadUnit, ...]:
    roster_raw = loads_raw.get("roster", "standard")
    if roster_raw == "standard":
        roster = standard_loads()
    else:
        roster = tuple(
            LoadUnit(id=str(u["id"]), bus=str(u["bus"]), cls=str(u["cls"]),
                     rated=float(u["rated"]),
                     power_factor=u.get("power_factor"))
            for u in roster_raw)
    setpoints = loads_raw.get("setpoints", {})
    return tuple(
        u.with_setpoint(float(setpoints.get(u.id, 0.0))) for u in roster)


def scenario_from_dict(raw: Mapping[str, Any]) -> Scenario:
    """Validate and materialize one scenario document."""
    warnings, errors = validate_scenario(raw)
    if errors:
        raise ScenarioError(errors)

    network = _build_network_section(raw.get("network", "standard"))
    gens, ess, smap = _build_fleet_section(raw.get("fleet", {}))
    loads = _build_loads_section(raw.get("loads", {}))
    sim_raw = dict(raw.get("sim", {}))
    sim = SimParams(
        dt=float(sim_raw.get("dt", SimParams.dt)),
        schedule_period=float(sim_raw.get("schedule_period",
                                          SimParams.schedule_period)),
        duration=float(sim_raw.get("duration", SimParams.duration)),
        partitions=int(sim_raw.get("partitions", SimParams.partitions)),
        seed=int(sim_raw.get("seed", SimParams.seed)),
        pace=float(sim_raw.get("pace", SimParams.pace)),
        decimation=int(sim_raw.get("decimation", SimParams.decimation)),
    )
    events = tuple(
        ContingencyEvent(at=float(ev["at"]), kind=str(ev["kind"]),
                         payload=dict(ev.get("payload", {})))
        for ev in raw.get("events", ()))
    disp_raw = raw.get("dispatch", {})
    return Scenario(
        name=str(raw["name"]),
        network=network,
        fleet=gens,
        ess=ess,
        loads=loads,
        mission=str(raw["mission"]),
        irradiance=tuple((float(t), float(g))
                         for t, g in raw.get("irradiance", ())),
        events=tuple(sorted(events, key=lambda e: e.at)),
        sim=sim,
        reserve_kw=float(disp_raw.get("reserve_kw", DEFAULT_RESERVE_KW)),
        grid_allows_fast=bool(disp_raw.get("grid_allows_fast", False)),
        sfoc_map=smap,
        description=str(raw.get("description", "")),
    )


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario file (JSON)."""
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: not valid JSON ({exc})"]) from exc
    return scenario_from_dict(raw)


# ---------------------------------------------------------------------------
# the bundled corpus
# ---------------------------------------------------------------------------


def bundled_scenario_names() -> tuple[str, ...]:
    """Names of the packaged scenario files, sorted."""
    root = resources.files("psvsim") / "scenarios"
    return tuple(sorted(
        p.name[:-len(".json")] for p in root.iterdir()
        if p.name.endswith(".json")))


def load_bundled(name: str) -> Scenario:
    """Load one packaged scenario by name (e.g. ``case1a``)."""
    root = resources.files("psvsim") / "scenarios"
    candidate = root / f"{name}.json"
    if not candidate.is_file():
        raise ScenarioError(
            [f"no bundled scenario {name!r}; "
             f"available: {', '.join(bundled_scenario_names())}"])
    return scenario_from_dict(json.loads(candidate.read_text()))


# ---------------------------------------------------------------------------
# static event application (one-shot dispatch view)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlantState:
    """The scenario's plant after applying events statically, for one-shot
    scheduling (times ignored, declaration order kept)."""
    network: NetworkModel
    fleet: tuple[GenUnit, ...]
    ess: EssUnit | None
    loads: tuple[LoadUnit, ...]
    mission: str
    approved_shed_kw: float = 0.0
    shed_entries: tuple[tuple[str, float], ...] = ()
    shed_advisories: tuple[str, ...] = ()


def terminal_state(scenario: Scenario) -> PlantState:
    """Apply every event of the scenario in order, statically."""
    network = scenario.network
    fleet = scenario.fleet
    ess = scenario.ess
    loads = scenario.loads
    mission = scenario.mission
    approved = 0.0
    shed_entries: list[tuple[str, float]] = []
    advisories: list[str] = []
    for ev in scenario.events:
        if ev.kind == "load-step":
            steps = {str(k): float(v) for k, v in ev.payload.items()}
            loads = tuple(
                u.with_setpoint(steps.get(u.id, u.current_setpoint))
                for u in loads)
        elif ev.kind == "bus-isolation":
            network = isolate_buses(network, ev.payload["buses"])
        elif ev.kind == "ess-unavailable":
            ess = None
        elif ev.kind == "gen-trip":
            down = set(ev.payload["units"])
            fleet = tuple(
                replace(g, online=False) if g.id in down else g
                for g in fleet)
        elif ev.kind == "mission-change":
            mission = str(ev.payload["mission"])
        elif ev.kind == "shed-approval":
            deficit = float(ev.payload["deficit_kw"])
            plan = shed_plan(mission_profile(mission), deficit, loads)
            cut = dict(plan.entries)
            loads = tuple(
                u.with_setpoint(u.current_setpoint + cut[u.id])
                if u.id in cut else u
                for u in loads)
            approved += plan.total_shed
            shed_entries.extend(plan.entries)
            if plan.advisory:
                advisories.append(plan.advisory)
    return PlantState(network=network, fleet=fleet, ess=ess, loads=loads,
                      mission=mission, approved_shed_kw=approved,
                      shed_entries=tuple(shed_entries),
                      shed_advisories=tuple(advisories))
