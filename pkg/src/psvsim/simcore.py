"""Fixed-step transient engine for the shipboard DC plant.

The network is quasi-static: every step solves the resistive flow for the
present injections, while the rotating machines, their governors and the
battery integrate real dynamics between solves.  The plant can be split into
partitions that exchange boundary quantities through gyrator links with a
one-step delay, so a run can be spread over workers without changing a single
byte of the trace.  A dispatch schedule is recomputed on a fixed period and
applied atomically at step boundaries, as are contingency events.

The trace is line-delimited JSON with a fixed field order per record kind;
equal runs produce byte-identical traces, summarized by a sha256 digest.
"""
from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .dispatch import (
    GenUnit,
    InfeasibleProblemError,
    Schedule,
    build_opf,
    solve_opf,
)
from .grid import (NetworkModel, _bus_order, default_slack, islands,
                   isolate_buses)
from .loads import MISSIONS, LoadUnit, mission_profile, shed_plan
from .powertrain import (
    ConverterPlant,
    DieselEngineParams,
    DieselEngineState,
    GovernorParams,
    GovernorState,
    RATED_SPEED_RPM,
    SfocMap,
    StallError,
    dc_link_step,
    de_step,
    engine_equilibrium,
    governor_equilibrium,
    governor_step,
    rpm_to_rad,
)
from .scenario import ContingencyEvent, Scenario
from .storage import BatteryPack, EssUnit, irradiance_at, pv_power, soc_step

__all__ = [
    "ContingencyEvent",
    "EnergyAudit",
    "GyratorLink",
    "InjectError",
    "Partition",
    "Partitioning",
    "RunResult",
    "SimEngine",
    "SimState",
    "SimTrace",
    "partition",
    "run_scenario",
]

RAMP_LIMIT_KW_S = 50.0          # storage converter power slew
SPEED_SLEW_RPM_S = 300.0        # speed-reference rate limit
SHADOW_SPEED_RPM = RATED_SPEED_RPM
_GOVERNOR = GovernorParams()
FLOW_TOL_W = 100.0              # summed nodal mismatch, matches the grid solver
PART_TOL_W = 1e-3               # partition sweeps run tighter so the boundary
                                # relaxation sees a low-noise fixed-point map
RESYNC_TOL_V = 1e-4             # boundary relaxation fixed-point tolerance [V]
RESYNC_MAX = 200                # boundary relaxation iteration ceiling
ANDERSON_MEMORY = 12            # secant history kept by the relaxation
MAX_ITERATIONS = 50
PARK_MARGIN = 1.05              # park a stopping engine this close to stall


class InjectError(ValueError):
    """A live command failed validation against the present plant state."""


# ---------------------------------------------------------------------------
# partitioning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GyratorLink:
    """Boundary coupling replacing one cut branch.

    Both partitions stamp the branch against a pinned copy of the far
    endpoint and exchange the endpoint voltages, so one sweep is a
    block-Jacobi relaxation of the plant's nodal equations.  The side nearer
    a source is named the voltage side; the current side owns the branch for
    loss accounting.  Exchanged port values are delayed by ``delay_steps``
    full steps except across a resynchronization.  ``r_t`` is the converter
    gyration ratio carried for interface completeness; the resistive exchange
    works directly in port variables.
    """
    id: str
    branch_id: str
    v_part: str                  # partition id exporting voltage
    i_part: str                  # partition id owning the branch
    v_bus: str                   # endpoint bus inside v_part
    i_bus: str                   # endpoint bus inside i_part
    r_milliohm: float
    r_t: float = 1e6
    delay_steps: int = 1

    def __post_init__(self) -> None:
        if self.delay_steps < 1:
            raise ValueError("gyrator exchange needs at least one step of delay")
        if self.r_milliohm <= 0:
            raise ValueError("cut branch resistance must be positive")


@dataclass(frozen=True)
class Partition:
    id: str
    buses: tuple[str, ...]
    links: tuple[GyratorLink, ...]   # every link touching this partition


@dataclass(frozen=True)
class Partitioning:
    parts: tuple[Partition, ...]
    k: int

    def owner(self, bus_id: str) -> str:
        for p in self.parts:
            if bus_id in p.buses:
                return p.id
        raise KeyError(bus_id)


def _adjacency(net: NetworkModel) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {b.id: set() for b in net.buses}
    for br in net.live_branches:
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)
    return adj


def _bisect(bus_set: list[str], net: NetworkModel) -> tuple[list[str], list[str]]:
    """Deterministic two-way split: seeds are the generator buses when the
    piece holds two, else the lowest bus and its graph-farthest peer; buses
    then accrete to the smaller side along live branches."""
    adj = _adjacency(net)
    inside = set(bus_set)
    gens = sorted((b.id for b in net.buses
                   if b.id in inside and b.kind == "generator"), key=_bus_order)
    if len(gens) >= 2:
        seed_a, seed_b = gens[0], gens[1]
    else:
        seed_a = min(bus_set, key=_bus_order)
        # BFS distances from seed_a, within the piece
        dist = {seed_a: 0}
        queue = deque([seed_a])
        while queue:
            u = queue.popleft()
            for v in sorted(adj[u], key=_bus_order):
                if v in inside and v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        far = max(dist.values(), default=0)
        seed_b = min((b for b, d in dist.items() if d == far and b != seed_a),
                     key=_bus_order, default=seed_a)
    side = {seed_a: 0, seed_b: 1}
    counts = [1, 1]
    frontier = True
    while frontier:
        frontier = False
        # the smaller side grows first; ties favor side 0
        for s in sorted((0, 1), key=lambda s: (counts[s], s)):
            candidates = sorted(
                (v for b, sb in list(side.items()) if sb == s
                 for v in adj[b] if v in inside and v not in side),
                key=_bus_order)
            if candidates:
                side[candidates[0]] = s
                counts[s] += 1
                frontier = True
                break
    for b in sorted(inside - set(side), key=_bus_order):
        side[b] = 0 if counts[0] <= counts[1] else 1
        counts[side[b]] += 1
    a = sorted((b for b, s in side.items() if s == 0), key=_bus_order)
    b_ = sorted((b for b, s in side.items() if s == 1), key=_bus_order)
    return a, b_


def partition(net: NetworkModel, k: int,
              hint: Sequence[Iterable[str]] | None = None) -> Partitioning:
    """Split the network into ``k`` bus groups for coupled sub-solves.

    ``k=1`` is the monolithic plant.  Electrical islands are never split
    across groups unless ``k`` exceeds the island count, in which case the
    largest groups are bisected greedily (deterministic seeds and accretion
    order).  An explicit ``hint`` — disjoint bus groups covering the network —
    overrides the greedy split.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    all_ids = {b.id for b in net.buses}

    if hint is not None:
        groups = [sorted(set(g), key=_bus_order) for g in hint]
        seen: set[str] = set()
        for g in groups:
            unknown = set(g) - all_ids
            if unknown:
                raise ValueError(f"hint names unknown buses {sorted(unknown)}")
            if seen & set(g):
                raise ValueError("hint groups overlap")
            seen |= set(g)
        if seen != all_ids:
            raise ValueError("hint must cover every bus exactly once")
    else:
        comps = sorted((sorted(c, key=_bus_order) for c in islands(net)),
                       key=lambda c: (-len(c), _bus_order(c[0])))
        k_eff = max(1, min(k, len(all_ids)))
        if k_eff <= len(comps):
            # distribute whole islands, largest first onto the lightest group
            groups: list[list[str]] = [[] for _ in range(k_eff)]
            for comp in comps:
                tgt = min(range(k_eff), key=lambda i: (len(groups[i]), i))
                groups[tgt].extend(comp)
        else:
            groups = [list(c) for c in comps]
            while len(groups) < k_eff:
                groups.sort(key=lambda g: (-len(g), _bus_order(g[0])))
                big = groups.pop(0)
                if len(big) < 2:
                    groups.append(big)
                    break
                a, b = _bisect(big, net)
                groups.extend([a, b])
        groups = [sorted(g, key=_bus_order) for g in groups if g]

    groups.sort(key=lambda g: _bus_order(g[0]))
    owner: dict[str, str] = {}
    for i, g in enumerate(groups):
        for b in g:
            owner[b] = f"P{i}"

    # gyrator links on every cut branch, oriented along the supply tree: the
    # endpoint nearer a source (by hops over live branches) exports voltage,
    # the downstream side pins the copy and owns the branch
    adj = _adjacency(net)
    sources = sorted((b.id for b in net.buses
                      if b.kind in ("generator", "ess")), key=_bus_order)
    dist: dict[str, int] = {s: 0 for s in sources}
    queue = deque(sources)
    while queue:
        u = queue.popleft()
        for v in sorted(adj[u], key=_bus_order):
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    far = len(all_ids) + 1
    links: list[GyratorLink] = []
    for br in sorted(net.live_branches, key=lambda b: b.id):
        pa, pb = owner[br.from_bus], owner[br.to_bus]
        if pa == pb:
            continue
        ka = (dist.get(br.from_bus, far), _bus_order(br.from_bus))
        kb = (dist.get(br.to_bus, far), _bus_order(br.to_bus))
        if ka <= kb:
            v_part, v_bus, i_part, i_bus = pa, br.from_bus, pb, br.to_bus
        else:
            v_part, v_bus, i_part, i_bus = pb, br.to_bus, pa, br.from_bus
        links.append(GyratorLink(
            id=f"G-{br.id}", branch_id=br.id,
            v_part=v_part, i_part=i_part, v_bus=v_bus, i_bus=i_bus,
            r_milliohm=br.r))

    parts = tuple(
        Partition(id=f"P{i}", buses=tuple(g),
                  links=tuple(l for l in links
                              if f"P{i}" in (l.v_part, l.i_part)))
        for i, g in enumerate(groups))
    return Partitioning(parts=parts, k=len(parts))


# ---------------------------------------------------------------------------
# per-partition flow solver
# ---------------------------------------------------------------------------


class _PartSolver:
    """Newton solver over one partition's buses.  Every cut branch is stamped
    on both of its partitions against a pinned copy of the far endpoint, so a
    sweep is one block-Jacobi step on the plant's nodal equations — a
    contraction for this resistive M-matrix system.  The branch's loss is
    counted only on the current side to avoid double booking."""

    def __init__(self, net: NetworkModel, part: Partition):
        self.part = part
        # the island reference buses of the FULL network: fixing exactly these
        # keeps the composite fixed point identical to the monolithic solve
        # (one anchor per island, slack power absorbed at the same bus)
        self.slack_buses = {
            sl for comp in islands(net)
            if (sl := default_slack(net, comp)) is not None}
        branch_by_id = {br.id: br for br in net.live_branches}
        local = list(part.buses)
        # one pinned far-endpoint copy per link touching this partition
        self.pins: list[tuple[GyratorLink, str, str]] = []   # (link, pin, far)
        pin_names: list[str] = []
        for link in part.links:
            far = link.v_bus if link.i_part == part.id else link.i_bus
            pin = f"{link.id}:{far}"
            self.pins.append((link, pin, far))
            pin_names.append(pin)
        self.order: list[str] = local + pin_names
        self.idx = {bid: i for i, bid in enumerate(self.order)}
        n = len(self.order)
        g = np.zeros((n, n))
        in_part = set(part.buses)
        self.own_branches: list[tuple[str, int, int, float]] = []
        for br in net.live_branches:
            if br.from_bus in in_part and br.to_bus in in_part:
                a, b = self.idx[br.from_bus], self.idx[br.to_bus]
                self._stamp(g, a, b, br.r_ohm)
                self.own_branches.append((br.id, a, b, br.r_ohm))
        for link, pin, far in self.pins:
            near = link.i_bus if link.i_part == part.id else link.v_bus
            a, b = self.idx[pin], self.idx[near]
            r_ohm = branch_by_id[link.branch_id].r_ohm
            self._stamp(g, a, b, r_ohm)
            if link.i_part == part.id:      # loss owner
                self.own_branches.append((link.branch_id, a, b, r_ohm))
        self.g = g
        self.base_voltage = net.base_voltage
        bus_by_id = {b.id: b for b in net.buses}
        self.kind = {bid: bus_by_id[bid].kind if bid in bus_by_id
                     else "boundary-node" for bid in self.order}
        self.vset = {bid: bus_by_id[bid].v_setpoint if bid in bus_by_id
                     else 1.0 for bid in self.order}
        # connected components over the stamped graph
        self.components = self._components(n)

    @staticmethod
    def _stamp(g: np.ndarray, a: int, b: int, r_ohm: float) -> None:
        y = 1.0 / r_ohm
        g[a, a] += y
        g[b, b] += y
        g[a, b] -= y
        g[b, a] -= y

    def _components(self, n: int) -> list[list[int]]:
        seen: set[int] = set()
        comps: list[list[int]] = []
        for start in range(n):
            if start in seen:
                continue
            comp = [start]
            seen.add(start)
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for vtx in np.flatnonzero(self.g[u]):
                    vtx = int(vtx)
                    if vtx != u and vtx not in seen:
                        seen.add(vtx)
                        comp.append(vtx)
                        queue.append(vtx)
            comps.append(sorted(comp))
        return comps

    def solve(self, injections_kw: Mapping[str, float],
              pin_volts: Mapping[str, float]) -> dict[str, Any]:
        """One partition sweep.  ``pin_volts`` carries link id -> the far
        endpoint's voltage [V] for every link touching this partition."""
        n = len(self.order)
        p = np.zeros(n)
        for bid, kw in injections_kw.items():
            i = self.idx.get(bid)
            if i is not None:
                p[i] += kw * 1e3
        v = np.array([self.vset[bid] * self.base_voltage for bid in self.order])
        fixed: set[int] = set()
        slack_idx: dict[int, str] = {}
        for link, pin, _ in self.pins:
            a = self.idx[pin]
            v[a] = pin_volts[link.id]
            fixed.add(a)
        for comp in self.components:
            anchored = False
            for i in comp:
                if self.order[i] in self.slack_buses:
                    fixed.add(i)
                    slack_idx[i] = self.order[i]
                    anchored = True
            if anchored or any(i in fixed for i in comp):
                continue
            if np.any(np.abs(p[comp]) > FLOW_TOL_W):
                raise RuntimeError(
                    f"partition {self.part.id}: component "
                    f"{[self.order[i] for i in comp]} has demand but no "
                    "source or boundary pin")
            fixed.update(comp)

        keep = [i for i in range(n) if i not in fixed]
        if keep:
            for _ in range(MAX_ITERATIONS):
                gv = self.g @ v
                f = v * gv - p
                fr = f[keep]
                if float(np.sum(np.abs(fr))) < PART_TOL_W:
                    break
                jac = (self.g * v[:, None]) + np.diag(gv)
                jr = jac[np.ix_(keep, keep)]
                dv = np.linalg.solve(jr, -fr)
                v[keep] += dv
            else:
                raise RuntimeError(
                    f"partition {self.part.id}: flow did not converge")
        gv = self.g @ v
        supplied = v * gv / 1e3                       # kW at each node
        losses = 0.0
        for _, a, b, r_ohm in self.own_branches:
            i = (v[a] - v[b]) / r_ohm
            losses += i * i * r_ohm / 1e3
        slack_kw = {bid: float(supplied[i]) for i, bid in slack_idx.items()}
        boundary: dict[str, float] = {}
        for link, _, _ in self.pins:
            near = link.i_bus if link.i_part == self.part.id else link.v_bus
            boundary[link.id] = float(v[self.idx[near]])
        volts = {bid: float(v[self.idx[bid]]) / self.base_voltage
                 for bid in self.part.buses}
        return {"v": volts, "losses": float(losses), "slack": slack_kw,
                "boundary_v": boundary}


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


class SimTrace:
    """Append-only line store.  Step time never decreases, step records are
    strictly increasing in t, and every schedule or event lands exactly once."""

    def __init__(self) -> None:
        self.lines: list[str] = []
        self.records: list[dict[str, Any]] = []
        self._t_last = -math.inf
        self._t_last_step = -math.inf

    def append(self, record: dict[str, Any]) -> None:
        t = float(record["t"])
        if t < self._t_last - 1e-12:
            raise ValueError(f"trace time went backwards: {t} < {self._t_last}")
        if record["rec"] == "step":
            if t <= self._t_last_step:
                raise ValueError("step records must strictly increase in t")
            self._t_last_step = t
        self._t_last = t
        self.records.append(record)
        self.lines.append(json.dumps(record, separators=(",", ":")))

    @property
    def text(self) -> str:
        return "\n".join(self.lines) + ("\n" if self.lines else "")

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def of(self, rec: str) -> list[dict[str, Any]]:
        return [r for r in self.records if r["rec"] == rec]

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.text)


# ---------------------------------------------------------------------------
# runtime state containers
# ---------------------------------------------------------------------------


@dataclass
class UnitState:
    unit: GenUnit
    params: DieselEngineParams
    engine: DieselEngineState | None
    governor: GovernorState
    link: ConverterPlant
    parked: bool = False
    ref_rpm: float = 0.0        # slew-limited speed reference actually tracked
    p_ff: float = 0.0           # last feedforward load target [kW]

    @property
    def omega(self) -> float:
        return self.engine.omega if self.engine is not None else 0.0


@dataclass
class SimState:
    """Live plant state between steps."""
    t: float
    step: int
    dt: float
    network: NetworkModel
    fleet: tuple[GenUnit, ...]
    loads: tuple[LoadUnit, ...]
    mission: str
    ess: EssUnit | None
    ess_available: bool
    pack: BatteryPack | None
    units: dict[str, UnitState]
    schedule: Schedule | None
    pending: tuple[tuple[int, int, ContingencyEvent, str], ...]
    bus_voltages: dict[str, float]


@dataclass(frozen=True)
class EnergyAudit:
    """Integral bookkeeping over one run, all in kWh at the plant level."""
    generation_kwh: float            # shaft mechanical work
    pv_kwh: float
    load_kwh: float
    network_loss_kwh: float
    rotational_loss_kwh: float
    charge_loss_kwh: float
    parked_kinetic_kwh: float        # kinetic energy written off at park
    storage_delta_kwh: float
    kinetic_delta_kwh: float
    unserved_kwh: float = 0.0        # informational: curtailed island demand

    @property
    def supplied_kwh(self) -> float:
        return self.generation_kwh + self.pv_kwh

    @property
    def accounted_kwh(self) -> float:
        return (self.load_kwh + self.network_loss_kwh
                + self.rotational_loss_kwh + self.charge_loss_kwh
                + self.parked_kinetic_kwh + self.storage_delta_kwh
                + self.kinetic_delta_kwh)

    @property
    def residual_kwh(self) -> float:
        return self.supplied_kwh - self.accounted_kwh

    @property
    def residual_pct(self) -> float:
        base = max(abs(self.supplied_kwh), 1e-9)
        return 100.0 * self.residual_kwh / base

    def ok(self, tol_pct: float = 0.5) -> bool:
        return abs(self.residual_pct) <= tol_pct


@dataclass(frozen=True)
class RunResult:
    trace: SimTrace
    audit: EnergyAudit
    schedules: tuple[tuple[float, Schedule], ...]
    engine: "SimEngine"

    @property
    def digest(self) -> str:
        return self.trace.digest

    def sfoc_series(self) -> list[tuple[float, float, float]]:
        """(t, storage terminal kW, fleet sfoc g/kWh) per step record."""
        out = []
        for r in self.trace.of("step"):
            out.append((r["t"], r["ess"]["p"], r["sfoc"]))
        return out

    def voltage_series(self, bus_id: str) -> list[tuple[float, float]]:
        return [(r["t"], r["v"][bus_id]) for r in self.trace.of("step")
                if bus_id in r["v"]]


# ---------------------------------------------------------------------------
# the engine
# ---------------------------------------------------------------------------


class SimEngine:
    """Owns one scenario run: fixed-step integration, scheduling, events,
    partitioned network sweeps, trace and audit."""

    def __init__(self, scenario: Scenario, *,
                 partitions: int | None = None,
                 workers: int = 1,
                 ramp_limit_kw_s: float = RAMP_LIMIT_KW_S,
                 schedule_period: float | None = None,
                 decimation: int | None = None,
                 hint: Sequence[Iterable[str]] | None = None):
        if workers < 1:
            raise ValueError("workers must be at least 1")
        self.scenario = scenario
        self.dt = scenario.sim.dt
        self.period = schedule_period or scenario.sim.schedule_period
        self.steps_per_period = max(1, round(self.period / self.dt))
        if abs(self.steps_per_period * self.dt - self.period) > 1e-9:
            raise ValueError("schedule period must be a multiple of dt")
        self.k = partitions if partitions is not None else scenario.sim.partitions
        self.workers = workers
        self.ramp = ramp_limit_kw_s
        self.decimation = decimation or scenario.sim.decimation
        self.hint = hint
        self.smap: SfocMap = scenario.sfoc_map
        self.trace = SimTrace()
        self.n_steps = round(scenario.sim.duration / self.dt)

        events = tuple(
            (self._quantize(ev.at), seq, ev, "scenario")
            for seq, ev in enumerate(scenario.events))
        self._seq = len(events)
        self.state = SimState(
            t=0.0, step=0, dt=self.dt,
            network=scenario.network,
            fleet=scenario.fleet,
            loads=scenario.loads,
            mission=scenario.mission,
            ess=scenario.ess,
            ess_available=scenario.ess is not None,
            pack=scenario.ess.battery if scenario.ess else None,
            units={}, schedule=None,
            pending=events,
            bus_voltages={},
        )
        self._batt_actual = 0.0
        self._batt_started = False
        self._schedules: list[Schedule] = []
        self._soc_floor_flagged = False
        self._curtailed: set[int] = set()
        self._excursion_flagged: set[str] = set()
        self._pool = (ThreadPoolExecutor(max_workers=workers)
                      if workers > 1 else None)

        # accumulators
        self._gen_kwh = 0.0
        self._pv_kwh = 0.0
        self._load_kwh = 0.0
        self._netloss_kwh = 0.0
        self._rotloss_kwh = 0.0
        self._chgloss_kwh = 0.0
        self._parked_kwh = 0.0
        self._unserved_kwh = 0.0
        self._soc0 = self.state.pack.soc if self.state.pack else 0.0
        self._kin0 = 0.0                     # set after first schedule
        self._kin0_done = False

        self._rebuild_partitions()
        self.trace.append({
            "rec": "meta", "t": 0.0, "schema": 1,
            "scenario": scenario.name, "dt": self.dt,
            "schedule_period": self.period,
            "duration": scenario.sim.duration,
            "partitions": self.k, "seed": scenario.sim.seed,
        })

    # -- helpers -----------------------------------------------------------

    def _quantize(self, at: float) -> int:
        return max(0, math.ceil(at / self.dt - 1e-9))

    def _kinetic_kwh(self) -> float:
        e = 0.0
        for us in self.state.units.values():
            if us.engine is not None and not us.parked:
                w = rpm_to_rad(us.engine.omega)
                e += 0.5 * us.params.j_rot * w * w
        return e / 3.6e6

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    # -- partitions ----------------------------------------------------------

    def _rebuild_partitions(self) -> None:
        self.partitioning = partition(self.state.network, self.k,
                                      hint=self.hint)
        self.solvers = [
            _PartSolver(self.state.network, p) for p in self.partitioning.parts]
        # pin buffer: (link id, partition id) -> far endpoint voltage [V]
        base_v = float(self.state.network.base_voltage)
        self._pin_v: dict[tuple[str, str], float] = {}
        for p in self.partitioning.parts:
            for link in p.links:
                self._pin_v.setdefault((link.id, p.id), base_v)
        self._island_of: dict[str, int] = {}
        for i, comp in enumerate(islands(self.state.network)):
            for bid in comp:
                self._island_of[bid] = i
        self._resync = True

    # -- event handling ------------------------------------------------------

    def inject(self, event: ContingencyEvent, *, source: str = "inject") -> int:
        """Validate a live command against the present plant and queue it for
        the next step boundary.  Returns the step index it will apply at."""
        st = self.state
        kind, payload = event.kind, event.payload
        if kind == "load-step":
            known = {u.id for u in st.loads}
            for lid, val in payload.items():
                if lid not in known:
                    raise InjectError(f"unknown load {lid!r}")
                if not isinstance(val, (int, float)) or val > 0:
                    raise InjectError(f"{lid}: consumption setpoint must be <= 0")
        elif kind == "bus-isolation":
            known = {b.id for b in st.network.buses}
            for bid in payload.get("buses", ()):
                if bid not in known:
                    raise InjectError(f"unknown bus {bid!r}")
        elif kind == "gen-trip":
            known = {g.id for g in st.fleet}
            for gid in payload.get("units", ()):
                if gid not in known:
                    raise InjectError(f"unknown unit {gid!r}")
        elif kind == "mission-change":
            if payload.get("mission") not in MISSIONS:
                raise InjectError(f"unknown mission {payload.get('mission')!r}")
        elif kind == "shed-approval":
            if not isinstance(payload.get("deficit_kw"), (int, float)) \
                    or payload["deficit_kw"] < 0:
                raise InjectError("shed-approval needs deficit_kw >= 0")
        elif kind == "ess-unavailable":
            pass
        else:
            raise InjectError(f"unknown event kind {kind!r}")
        at_step = max(self.state.step, self._quantize(event.at)) \
            if event.at > 0 else self.state.step
        entry = (at_step, self._seq, event, source)
        self._seq += 1
        self.state.pending = tuple(sorted(
            self.state.pending + (entry,), key=lambda e: (e[0], e[1])))
        return at_step

    def _apply_event(self, ev: ContingencyEvent, source: str) -> None:
        st = self.state
        if ev.kind == "load-step":
            steps = {str(k): float(v) for k, v in ev.payload.items()}
            st.loads = tuple(
                u.with_setpoint(steps.get(u.id, u.current_setpoint))
                for u in st.loads)
        elif ev.kind == "bus-isolation":
            st.network = isolate_buses(st.network, ev.payload["buses"])
            self._rebuild_partitions()
        elif ev.kind == "ess-unavailable":
            st.ess_available = False
            self._batt_actual = 0.0
        elif ev.kind == "gen-trip":
            down = set(ev.payload["units"])
            st.fleet = tuple(
                replace(g, online=False) if g.id in down else g
                for g in st.fleet)
            for gid in sorted(down):
                us = st.units.get(gid)
                if us is not None and not us.parked:
                    self._park(us, note="tripped")
        elif ev.kind == "mission-change":
            st.mission = str(ev.payload["mission"])
        elif ev.kind == "shed-approval":
            plan = shed_plan(mission_profile(st.mission),
                             float(ev.payload["deficit_kw"]), st.loads)
            cut = dict(plan.entries)
            st.loads = tuple(
                u.with_setpoint(u.current_setpoint + cut[u.id])
                if u.id in cut else u
                for u in st.loads)
            extra = {"applied_entries": [list(e) for e in plan.entries],
                     "shed_total_kw": plan.total_shed}
            if plan.advisory:
                extra["advisory"] = plan.advisory
        record_payload = dict(ev.payload)
        if ev.kind == "shed-approval":
            record_payload.update(extra)
        self.trace.append({
            "rec": "event", "t": st.t, "kind": ev.kind,
            "payload": record_payload, "source": source,
        })
        self._resync = True

    def _emit(self, kind: str, **payload: Any) -> None:
        self.trace.append({
            "rec": "event", "t": self.state.t, "kind": kind,
            "payload": payload, "source": "sim",
        })

    def annotate(self, kind: str, payload: Mapping[str, Any] | None = None,
                 *, source: str = "gateway") -> None:
        """Write a session-level note (operator pause, snapshot, ...) into the
        trace at the present step boundary without touching plant state."""
        self.trace.append({
            "rec": "event", "t": self.state.step * self.dt, "kind": kind,
            "payload": dict(payload or {}), "source": source,
        })

    def _park(self, us: UnitState, note: str) -> None:
        if us.engine is not None:
            w = rpm_to_rad(us.engine.omega)
            self._parked_kwh += 0.5 * us.params.j_rot * w * w / 3.6e6
        us.parked = True
        us.engine = None
        self._emit("gen-stop", unit=us.unit.id, note=note)

    # -- scheduling ------------------------------------------------------------

    def _current_ess(self) -> EssUnit | None:
        st = self.state
        if st.ess is None or not st.ess_available:
            return None
        return replace(st.ess, battery=st.pack)

    def _pv_now(self) -> float:
        st = self.state
        if st.ess is None or not st.ess_available or not self.scenario.irradiance:
            return 0.0
        g = irradiance_at(self.scenario.irradiance, st.t)
        return pv_power(st.ess.pv, g)

    def _fleet_sfoc(self, powers: Mapping[str, float],
                    speeds: Mapping[str, float]) -> float:
        num = den = 0.0
        for gid, p in powers.items():
            w = speeds.get(gid, 0.0)
            if p > 0 and w > 0:
                num += self.smap.sfoc(p, w) * p
                den += p
        return num / den if den > 0 else 0.0

    def _reschedule(self) -> None:
        st = self.state
        ess = self._current_ess()
        pv = self._pv_now()
        try:
            prob = build_opf(
                st.network, st.fleet, ess, st.loads, st.mission,
                pv_kw=pv, reserve_kw=self.scenario.reserve_kw,
                grid_allows_fast=self.scenario.grid_allows_fast,
                sfoc_map=self.smap)
            sched = solve_opf(prob)
        except InfeasibleProblemError as exc:
            self._emit("dispatch-infeasible", detail=str(exc))
            return
        st.schedule = sched
        self._schedules.append(sched)
        shadow = {gid: SHADOW_SPEED_RPM for gid in sched.gen_kw}
        self.trace.append({
            "rec": "schedule", "t": st.t,
            "mode": sched.mode,
            "objective_kg_h": sched.objective,
            "gen_kw": {k: sched.gen_kw[k] for k in sorted(sched.gen_kw)},
            "omega_ref": {k: sched.omega_ref[k]
                          for k in sorted(sched.omega_ref)},
            "ess_kw": sched.ess_kw,
            "ess_mode": sched.ess_mode,
            "shed_kw": sched.shed_kw,
            "violations": [v.constraint for v in sched.violations],
            "sfoc_opt": self._fleet_sfoc(sched.gen_kw, sched.omega_ref),
            "sfoc_shadow": self._fleet_sfoc(sched.gen_kw, shadow),
        })
        self._sync_units()
        self._resync = True

    def _sync_units(self) -> None:
        """Create engine states for newly dispatched units; settled start."""
        st = self.state
        sched = st.schedule
        if sched is None:
            return
        for gid in sorted(sched.gen_kw):
            unit = next(g for g in st.fleet if g.id == gid)
            p = sched.gen_kw[gid]
            w_ref = sched.omega_ref.get(gid, 0.0)
            us = st.units.get(gid)
            if us is None:
                params = DieselEngineParams(p_rated=unit.p_rated)
                if p > 0 and w_ref > 0:
                    engine = engine_equilibrium(params, p, w_ref, self.dt,
                                                t=st.t)
                    gov = governor_equilibrium(engine.u_f)
                    link = ConverterPlant(i_l=p * 1e3 / 1500.0)
                    st.units[gid] = UnitState(unit=unit, params=params,
                                              engine=engine, governor=gov,
                                              link=link, parked=False,
                                              ref_rpm=w_ref, p_ff=p)
                else:
                    st.units[gid] = UnitState(
                        unit=unit, params=params, engine=None,
                        governor=governor_equilibrium(0.0),
                        link=ConverterPlant(), parked=True)
        if not self._batt_started:
            pv = self._pv_now()
            self._batt_actual = sched.ess_kw - pv \
                if (st.ess is not None and st.ess_available) else 0.0
            self._batt_started = True
        if not self._kin0_done:
            self._kin0 = self._kinetic_kwh()
            self._kin0_done = True

    # -- per-step targets -------------------------------------------------------

    def _unit_cap(self, gid: str) -> float:
        """Fuel-limited sustained electrical output of one unit [kW]: full
        actuator at rated speed, net of rotational loss.  Demand beyond this
        only drains the flywheel and ends in a stall, so targets never
        exceed it."""
        us = self.state.units.get(gid)
        if us is not None:
            params = us.params
        else:
            unit = next(g for g in self.state.fleet if g.id == gid)
            params = DieselEngineParams(p_rated=unit.p_rated)
        return (_GOVERNOR.u_max * params.k_pm * params.p_rated
                - params.loss_kw(params.omega_rated))

    def _unit_targets(self) -> dict[str, float]:
        """Electrical power each live unit should carry this step: the
        schedule share, any orphaned share of units lost since the boundary,
        and an equal slice of the storage ramp residual — water-filled under
        each unit's deliverable cap."""
        st = self.state
        sched = st.schedule
        if sched is None:
            return {}
        online = {g.id for g in st.fleet if g.online}
        live = [gid for gid, p in sorted(sched.gen_kw.items())
                if p > 0 and gid in online
                and not (st.units.get(gid) and st.units[gid].parked)]
        if not live:
            return {}
        orphan = sum(p for gid, p in sched.gen_kw.items()
                     if p > 0 and gid not in live)
        ess_resid = 0.0
        if st.ess is not None and st.ess_available:
            actual = self._batt_actual + self._pv_now()
            ess_resid = sched.ess_kw - actual
        elif sched.ess_kw:
            ess_resid = sched.ess_kw     # storage promised, then lost
        caps = {gid: self._unit_cap(gid) for gid in live}
        extra = (orphan + ess_resid) / len(live)
        targets = {gid: max(sched.gen_kw[gid] + extra, 0.0) for gid in live}
        # water-fill any capped overflow onto units with headroom left
        for _ in range(len(live)):
            spill = 0.0
            open_gids = []
            for gid in live:
                if targets[gid] > caps[gid]:
                    spill += targets[gid] - caps[gid]
                    targets[gid] = caps[gid]
                elif targets[gid] < caps[gid]:
                    open_gids.append(gid)
            if spill <= 1e-9 or not open_gids:
                break
            share = spill / len(open_gids)
            for gid in open_gids:
                targets[gid] += share
        return targets

    def _ess_step_power(self) -> tuple[float, float]:
        """(battery kW, pv kW) actually flowing this step, slew-limited and
        charge-state guarded."""
        st = self.state
        if st.ess is None or not st.ess_available or st.pack is None:
            return 0.0, 0.0
        pv = self._pv_now()
        sched = st.schedule
        target = (sched.ess_kw - pv) if sched is not None else 0.0
        # the converter rating bounds the terminal, schedule notwithstanding
        rating = st.ess.p_rating
        target = min(max(target, -rating - pv), rating - pv)
        de = self.ramp * self.dt
        cur = self._batt_actual
        if cur < target:
            cur = min(cur + de, target)
        else:
            cur = max(cur - de, target)
        pack = st.pack
        if cur > 0:
            room_kwh = max(0.0, (pack.soc - pack.soc_min) * pack.energy_kwh)
            lim = room_kwh * 3600.0 / self.dt
            if cur > lim:
                cur = min(cur, lim)
                if not self._soc_floor_flagged:
                    self._emit("soc-floor", soc=pack.soc)
                    self._soc_floor_flagged = True
        elif cur < 0:
            room_kwh = max(0.0, (pack.soc_max - pack.soc) * pack.energy_kwh
                           / pack.eta_charge)
            lim = -room_kwh * 3600.0 / self.dt
            if cur < lim:
                cur = max(cur, lim)
        self._batt_actual = cur
        return cur, pv

    # -- network sweep -----------------------------------------------------------

    def _served_setpoints(self, unit_targets: Mapping[str, float],
                          ess_kw: float) -> tuple[dict[str, float], float]:
        """Per-load effective setpoints for this step.  An island whose
        sources cannot cover its demand sheds the remainder pro-rata — the
        desk-scale stand-in for a voltage collapse — and the shortfall is
        booked as unserved."""
        st = self.state
        supply: dict[int, float] = {}
        demand: dict[int, float] = {}
        for gid, p in unit_targets.items():
            unit = next(g for g in st.fleet if g.id == gid)
            isl = self._island_of[unit.bus]
            supply[isl] = supply.get(isl, 0.0) + p
        if st.ess is not None and ess_kw:
            isl = self._island_of[st.ess.bus]
            supply[isl] = supply.get(isl, 0.0) + ess_kw
        for u in st.loads:
            if u.current_setpoint:
                isl = self._island_of[u.bus]
                demand[isl] = demand.get(isl, 0.0) - u.current_setpoint
        factor: dict[int, float] = {}
        shortfall_total = 0.0
        for isl, dem in demand.items():
            sup = supply.get(isl, 0.0)
            if dem > sup + 1e-9:
                factor[isl] = max(sup, 0.0) / dem
                shortfall_total += dem - max(sup, 0.0)
                if isl not in self._curtailed:
                    self._curtailed.add(isl)
                    self._emit("under-supply", island=isl,
                               shortfall_kw=round(dem - max(sup, 0.0), 1))
            else:
                self._curtailed.discard(isl)
        eff = {}
        for u in st.loads:
            f = factor.get(self._island_of[u.bus], 1.0)
            eff[u.id] = u.current_setpoint * f
        return eff, shortfall_total

    def _injections(self, unit_targets: Mapping[str, float], ess_kw: float,
                    setpoints: Mapping[str, float]) -> dict[str, float]:
        st = self.state
        inj: dict[str, float] = {}
        for gid, p in unit_targets.items():
            unit = next(g for g in st.fleet if g.id == gid)
            inj[unit.bus] = inj.get(unit.bus, 0.0) + p
        if st.ess is not None and ess_kw:
            inj[st.ess.bus] = inj.get(st.ess.bus, 0.0) + ess_kw
        for u in st.loads:
            sp = setpoints[u.id]
            if sp:
                inj[u.bus] = inj.get(u.bus, 0.0) + sp
        return inj

    def _sweep_once(self, inj: Mapping[str, float]) -> list[dict[str, Any]]:
        def solve_one(solver: _PartSolver) -> dict[str, Any]:
            pins = {link.id: self._pin_v[(link.id, solver.part.id)]
                    for link in solver.part.links}
            return solver.solve(inj, pins)

        if self._pool is not None:
            return list(self._pool.map(solve_one, self.solvers))
        return [solve_one(s) for s in self.solvers]

    def _exchange(self, results: list[dict[str, Any]]) -> float:
        """Route each partition's boundary voltages to the far side's pin
        buffer; returns the largest pin movement [V]."""
        delta = 0.0
        for part, res in zip(self.partitioning.parts, results):
            for link in part.links:
                far = link.i_part if link.v_part == part.id else link.v_part
                key = (link.id, far)
                v = res["boundary_v"][link.id]
                delta = max(delta, abs(v - self._pin_v[key]))
                self._pin_v[key] = v
        return delta

    def _solve_network(self, inj: Mapping[str, float]) -> tuple[
            dict[str, float], float, dict[str, float]]:
        results = self._sweep_once(inj)
        if self._resync and self._pin_v:
            # boundary resynchronization: drive the pinned port voltages to
            # their fixed point at the same t so a discontinuity does not ride
            # in on a step of stale exchange.  Plain relaxation crawls when a
            # partition chain shares one stiff voltage reference, so the pin
            # vector is Anderson-accelerated: the interface map is close to
            # linear in a handful of pins, and the secant least-squares closes
            # it in roughly as many sweeps as there are pins.
            keys = sorted(self._pin_v)
            xs: list[np.ndarray] = []
            rs: list[np.ndarray] = []
            for _ in range(RESYNC_MAX):
                x = np.array([self._pin_v[k] for k in keys])
                self._exchange(results)
                fx = np.array([self._pin_v[k] for k in keys])
                r = fx - x
                if float(np.max(np.abs(r))) < RESYNC_TOL_V:
                    break
                xs.append(x)
                rs.append(r)
                if len(xs) > ANDERSON_MEMORY:
                    xs.pop(0)
                    rs.pop(0)
                if len(xs) >= 2:
                    dr = np.column_stack(
                        [rs[i + 1] - rs[i] for i in range(len(rs) - 1)])
                    dx = np.column_stack(
                        [xs[i + 1] - xs[i] for i in range(len(xs) - 1)])
                    gamma = np.linalg.lstsq(dr, r, rcond=None)[0]
                    x_new = x + r - (dx + dr) @ gamma
                else:
                    x_new = x + 0.5 * r
                # trust region: pins stay near nominal so every partition
                # solve starts inside its convergence basin
                base = self.state.network.base_voltage
                x_new = np.clip(x_new, 0.9 * base, 1.1 * base)
                for k, val in zip(keys, x_new):
                    self._pin_v[k] = float(val)
                results = self._sweep_once(inj)
            else:
                raise RuntimeError("boundary resync did not converge")
        self._resync = False
        volts: dict[str, float] = {}
        losses = 0.0
        slack: dict[str, float] = {}
        for res in results:
            volts.update(res["v"])
            losses += res["losses"]
            slack.update(res["slack"])
        self._exchange(results)
        return volts, losses, slack

    # -- stepping ---------------------------------------------------------------

    def step(self) -> None:
        """Advance the plant by one dt: due events, a schedule on its period,
        the network sweep, then every machine and the battery."""
        st = self.state
        n = st.step
        st.t = n * self.dt

        due = [e for e in st.pending if e[0] <= n]
        if due:
            st.pending = tuple(e for e in st.pending if e[0] > n)
            for _, _, ev, source in due:
                self._apply_event(ev, source)
        if n % self.steps_per_period == 0:
            self._reschedule()

        targets = self._unit_targets()
        p_batt, pv = self._ess_step_power()
        ess_terminal = p_batt + pv
        served, shortfall = self._served_setpoints(targets, ess_terminal)
        inj = self._injections(targets, ess_terminal, served)
        volts, losses, slack = self._solve_network(inj)
        st.bus_voltages = volts

        # assign electrical demand: slack buses absorb loss + boundary lag
        bus_units: dict[str, list[str]] = {}
        for gid in targets:
            unit = next(g for g in st.fleet if g.id == gid)
            bus_units.setdefault(unit.bus, []).append(gid)
        demand = dict(targets)
        for bus, supplied in slack.items():
            gids = bus_units.get(bus)
            if not gids:
                continue
            scheduled = sum(targets[g] for g in gids)
            extra = (supplied - scheduled) / len(gids)
            for g in gids:
                demand[g] += extra

        sched = st.schedule
        step_gen: dict[str, dict[str, float]] = {}
        sfoc_num = sfoc_den = 0.0
        shadow_num = 0.0
        for gid in sorted(st.units):
            us = st.units[gid]
            if us.parked or us.engine is None:
                step_gen[gid] = {"w": 0.0, "p": 0.0, "pm": 0.0}
                continue
            p_elec = demand.get(gid, 0.0)
            w_ref = sched.omega_ref.get(gid, 0.0) if sched else 0.0
            w_old = rpm_to_rad(us.engine.omega)
            if w_ref <= 0.0:
                u_f = 0.0
                us.ref_rpm = 0.0
                if us.engine.omega <= us.params.stall_rpm * PARK_MARGIN:
                    self._park(us, note="stopped on a dead bus")
                    step_gen[gid] = {"w": 0.0, "p": 0.0, "pm": 0.0}
                    continue
            else:
                # the reference ramps rather than steps; known dispatch
                # changes and the ramp's acceleration power both feed
                # forward, so the PI only trims small errors instead of
                # winding up and ringing across large ones
                slew = SPEED_SLEW_RPM_S * self.dt
                ref_prev = us.ref_rpm
                if ref_prev <= 0.0:
                    us.ref_rpm = w_ref
                    ref_prev = w_ref
                elif ref_prev < w_ref:
                    us.ref_rpm = min(ref_prev + slew, w_ref)
                else:
                    us.ref_rpm = max(ref_prev - slew, w_ref)
                tgt = targets.get(gid, 0.0)
                if tgt != us.p_ff:
                    ff = (tgt - us.p_ff) / (us.params.k_pm * us.params.p_rated)
                    us.governor = GovernorState(
                        integral=us.governor.integral + ff)
                    us.p_ff = tgt
                u_pi, us.governor = governor_step(
                    us.governor, _GOVERNOR, us.ref_rpm, us.engine.omega,
                    self.dt)
                alpha = rpm_to_rad(us.ref_rpm - ref_prev) / self.dt
                u_acc = us.params.j_rot * w_old * alpha \
                    / (us.params.k_pm * us.params.p_rated * 1e3)
                u_f = min(max(u_pi + u_acc, _GOVERNOR.u_min), _GOVERNOR.u_max)
            try:
                us.engine = de_step(us.engine, us.params, u_f, p_elec, self.dt)
            except StallError as exc:
                self._park(us, note=f"stalled: {exc}")
                self._emit("gen-stall", unit=gid, load_kw=p_elec)
                step_gen[gid] = {"w": 0.0, "p": 0.0, "pm": 0.0}
                continue
            self._rotloss_kwh += (us.params.k_loss * w_old * w_old / 1e3) \
                * self.dt / 3600.0
            self._gen_kwh += us.engine.p_mech * self.dt / 3600.0
            # shaft power net of rotation change equals the electrical draw by
            # the torque balance, so the machine-side link sees matched flows;
            # it departs from setpoint only when the drive chain breaks down
            us.link = dc_link_step(us.link, p_elec,
                                   p_elec * 1e3 / us.link.v_dc, self.dt)
            if us.link.excursion and gid not in self._excursion_flagged:
                self._excursion_flagged.add(gid)
                self._emit("dc-link-excursion", unit=gid,
                           v_dc=round(us.link.v_dc, 1))
            elif not us.link.excursion:
                self._excursion_flagged.discard(gid)
            step_gen[gid] = {"w": us.engine.omega, "p": p_elec,
                             "pm": us.engine.p_mech}
            if p_elec > 0 and us.engine.omega > 0:
                s = self.smap.sfoc(p_elec, us.engine.omega)
                sfoc_num += s * p_elec
                shadow_num += self.smap.sfoc(p_elec, SHADOW_SPEED_RPM) * p_elec
                sfoc_den += p_elec

        if st.pack is not None and st.ess_available:
            if p_batt < 0:
                self._chgloss_kwh += (1.0 - st.pack.eta_charge) \
                    * (-p_batt) * self.dt / 3600.0
            st.pack = soc_step(st.pack, p_batt, self.dt)
        self._pv_kwh += pv * self.dt / 3600.0
        self._load_kwh += sum(-sp for sp in served.values()) \
            * self.dt / 3600.0
        self._unserved_kwh += shortfall * self.dt / 3600.0
        self._netloss_kwh += losses * self.dt / 3600.0

        if n % self.decimation == 0:
            self.trace.append({
                "rec": "step", "t": st.t,
                "gen": step_gen,
                "v": {b: volts[b] for b in sorted(volts, key=_bus_order)},
                "ess": {"p": ess_terminal, "pb": p_batt, "pv": pv,
                        "soc": st.pack.soc if st.pack else 0.0},
                "sfoc": (sfoc_num / sfoc_den) if sfoc_den else 0.0,
                "shadow": (shadow_num / sfoc_den) if sfoc_den else 0.0,
            })
        st.step = n + 1
        st.t = st.step * self.dt

    def run(self) -> RunResult:
        try:
            for _ in range(self.n_steps):
                self.step()
            if self.n_steps == 0:
                # validation-only run still reports the t=0 schedule
                self._reschedule()
            audit = self.audit()
            self.trace.append({
                "rec": "audit", "t": self.state.t,
                "generation_kwh": audit.generation_kwh,
                "pv_kwh": audit.pv_kwh,
                "load_kwh": audit.load_kwh,
                "network_loss_kwh": audit.network_loss_kwh,
                "rotational_loss_kwh": audit.rotational_loss_kwh,
                "charge_loss_kwh": audit.charge_loss_kwh,
                "parked_kinetic_kwh": audit.parked_kinetic_kwh,
                "storage_delta_kwh": audit.storage_delta_kwh,
                "kinetic_delta_kwh": audit.kinetic_delta_kwh,
                "unserved_kwh": audit.unserved_kwh,
                "residual_pct": audit.residual_pct,
            })
        finally:
            self.close()
        schedules = tuple(
            (r["t"], s) for r, s in zip(self.trace.of("schedule"),
                                        self._schedules))
        return RunResult(trace=self.trace, audit=audit, schedules=schedules,
                         engine=self)

    def audit(self) -> EnergyAudit:
        st = self.state
        storage_delta = 0.0
        if st.pack is not None:
            storage_delta = (st.pack.soc - self._soc0) * st.pack.energy_kwh
        return EnergyAudit(
            generation_kwh=self._gen_kwh,
            pv_kwh=self._pv_kwh,
            load_kwh=self._load_kwh,
            network_loss_kwh=self._netloss_kwh,
            rotational_loss_kwh=self._rotloss_kwh,
            charge_loss_kwh=self._chgloss_kwh,
            parked_kinetic_kwh=self._parked_kwh,
            storage_delta_kwh=storage_delta,
            kinetic_delta_kwh=self._kinetic_kwh() - self._kin0,
            unserved_kwh=self._unserved_kwh,
        )

    def snapshot(self) -> dict[str, Any]:
        st = self.state
        return {
            "t": st.t,
            "step": st.step,
            "mission": st.mission,
            "soc": st.pack.soc if st.pack else None,
            "ess_available": st.ess_available,
            "mode": st.schedule.mode if st.schedule else None,
            "omega": {gid: round(us.omega, 2)
                      for gid, us in sorted(st.units.items())},
            "pending_events": len(st.pending),
            "partitions": self.partitioning.k,
        }


def run_scenario(scenario: Scenario,
                 schedule_period: float | None = None,
                 *,
                 partitions: int | None = None,
                 workers: int = 1,
                 ramp_limit_kw_s: float = RAMP_LIMIT_KW_S,
                 decimation: int | None = None,
                 hint: Sequence[Iterable[str]] | None = None) -> RunResult:
    """Integrate one scenario to its configured duration, interleaving the
    dispatch solve every schedule period, and return trace + audit."""
    eng = SimEngine(scenario, partitions=partitions, workers=workers,
                    ramp_limit_kw_s=ramp_limit_kw_s,
                    schedule_period=schedule_period, decimation=decimation,
                    hint=hint)
    return eng.run()
