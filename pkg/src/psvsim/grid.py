"""Reduced bus-branch network model of the vessel DC distribution system:
incidence/conductance construction, nonlinear DC power flow with losses,
bus-impedance matrices and operating-limit checks.

Power convention follows the bus table: generation positive, consumption
negative.  Voltages are solved in volts and reported per-unit on the system
base.  Branches carrying a reactance value are AC stubs lumped behind their
converters; on the DC side they conduct with their series resistance.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

BASE_VOLTAGE_V = 1500.0
BASE_POWER_KVA = 4096.0
FLOW_TOL_KW = 0.1
MAX_ITERATIONS = 50


class ModelError(ValueError):
    """The network description violates a structural invariant."""


class IslandingError(RuntimeError):
    """A live island has load but no source able to serve it."""


class NumericError(RuntimeError):
    """The flow iteration failed to converge; carries the best residual."""

    def __init__(self, message: str, residual_kw: float):
        super().__init__(message)
        self.residual_kw = residual_kw


# ---------------------------------------------------------------------------
# model types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bus:
    id: str
    kind: str = "load"               # generator | load | ess | junction | boundary-node
    p_max: float = 0.0               # kW, most positive injection
    p_min: float = 0.0               # kW, most negative injection
    q_rating: float | None = None    # kVAr carried by the AC group, if any
    v_setpoint: float = 1.0          # pu
    v_min: float = 0.95              # pu
    v_max: float = 1.05              # pu


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str
    r: float                         # milliohm
    x: float | None = None           # milliohm, None for pure-DC lines
    rating: float = BASE_POWER_KVA   # kVA
    derating_factor: float = 1.25

    @property
    def r_ohm(self) -> float:
        return self.r * 1e-3

    @property
    def limit_kva(self) -> float:
        return self.rating * self.derating_factor


@dataclass(frozen=True)
class NetworkModel:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    base_voltage: float = BASE_VOLTAGE_V
    base_power: float = BASE_POWER_KVA
    isolated: frozenset[str] = frozenset()

    def bus(self, bus_id: str) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(bus_id)

    @property
    def live_buses(self) -> tuple[Bus, ...]:
        # an isolated bus stays modeled -- it becomes its own island; only its
        # branches are switched out
        return self.buses

    @property
    def live_branches(self) -> tuple[Branch, ...]:
        dead = self.isolated
        return tuple(
            br for br in self.branches
            if br.from_bus not in dead and br.to_bus not in dead
        )


def build_network(
    buses: Iterable[Bus],
    branches: Iterable[Branch],
    base_voltage: float = BASE_VOLTAGE_V,
    base_power: float = BASE_POWER_KVA,
    isolated: Iterable[str] = (),
) -> NetworkModel:
    """Validate and freeze a network model.

    Raises ModelError on duplicate ids, dangling branch endpoints,
    non-positive resistance/rating, or inverted bus limits.
    """
    buses = tuple(buses)
    branches = tuple(branches)
    ids = [b.id for b in buses]
    if len(set(ids)) != len(ids):
        raise ModelError("duplicate bus ids")
    id_set = set(ids)
    seen_br = set()
    for br in branches:
        if br.id in seen_br:
            raise ModelError(f"duplicate branch id {br.id}")
        seen_br.add(br.id)
        if br.from_bus not in id_set or br.to_bus not in id_set:
            raise ModelError(f"branch {br.id} has a dangling endpoint")
        if br.from_bus == br.to_bus:
            raise ModelError(f"branch {br.id} is a self-loop")
        if br.r <= 0 or br.rating <= 0:
            raise ModelError(f"branch {br.id} needs positive r and rating")
    for b in buses:
        if b.p_min > b.p_max:
            raise ModelError(f"bus {b.id}: p_min above p_max")
        if not (b.v_min < b.v_setpoint < b.v_max):
            raise ModelError(f"bus {b.id}: voltage band does not bracket setpoint")
    unknown = set(isolated) - id_set
    if unknown:
        raise ModelError(f"isolating unknown buses: {sorted(unknown)}")
    return NetworkModel(buses=buses, branches=branches, base_voltage=base_voltage,
                        base_power=base_power, isolated=frozenset(isolated))


def isolate_buses(net: NetworkModel, bus_ids: Iterable[str]) -> NetworkModel:
    """Network with additional buses (and their branches) switched out."""
    extra = set(bus_ids)
    unknown = extra - {b.id for b in net.buses}
    if unknown:
        raise ModelError(f"isolating unknown buses: {sorted(unknown)}")
    return replace(net, isolated=net.isolated | extra)


# ---------------------------------------------------------------------------
# the standard 20-bus vessel network
# ---------------------------------------------------------------------------

_HOTEL = "boundary-node"  # AC consumer groups lumped behind converters

_STANDARD_BUSES = (
    Bus("B1", "generator", p_max=4096.0),
    Bus("B2", "generator", p_max=4096.0),
    Bus("B3", "load", p_min=-3000.0),
    Bus("B4", _HOTEL, p_min=-640.0, q_rating=480.0),
    Bus("B5", "load", p_min=-1100.0),
    Bus("B6", _HOTEL, p_min=-640.0, q_rating=480.0),
    Bus("B7", "load", p_min=-3000.0),
    Bus("B8", _HOTEL, p_min=-240.0, q_rating=180.0),
    Bus("B9", _HOTEL, p_min=-400.0, q_rating=300.0),
    Bus("B10", _HOTEL, p_min=-400.0, q_rating=300.0),
    Bus("B11", _HOTEL, p_min=-240.0, q_rating=180.0),
    Bus("B12", "load", p_min=-1100.0),
    Bus("B13", "load", p_min=-450.0),
    Bus("B14", "ess", p_max=820.0, p_min=-820.0),
    Bus("B15", "load", p_min=-450.0),
    Bus("B16", "load", p_min=-1100.0),
    Bus("B17", _HOTEL, p_min=-80.0, q_rating=60.0),
    Bus("B18", _HOTEL, p_min=-80.0, q_rating=60.0),
    Bus("B19", _HOTEL, p_min=-80.0, q_rating=60.0),
    Bus("B20", _HOTEL, p_min=-80.0, q_rating=60.0),
)

_STANDARD_BRANCHES = (
    Branch("L1", "B4", "B1", r=0.48, rating=4096.0),
    Branch("L2", "B6", "B2", r=0.48, rating=4096.0),
    Branch("L3", "B12", "B3", r=0.092, rating=3500.0),
    Branch("L4", "B4", "B3", r=0.092, rating=3500.0),
    Branch("L5", "B5", "B4", r=1.5, rating=3000.0),
    Branch("L6", "B6", "B5", r=1.2, rating=3000.0),
    Branch("L7", "B7", "B6", r=0.64, x=0.75, rating=1600.0),
    Branch("L8", "B16", "B7", r=0.64, x=0.75, rating=1600.0),
    Branch("L9", "B9", "B4", r=3.2, rating=1100.0),
    Branch("L10", "B11", "B6", r=3.2, rating=1100.0),
    Branch("L11", "B9", "B8", r=2.56, rating=450.0),
    Branch("L12", "B10", "B9", r=2.56, rating=450.0),
    Branch("L13", "B11", "B10", r=2.56, x=2.31, rating=400.0),
    Branch("L14", "B13", "B12", r=2.56, x=2.31, rating=400.0),
    Branch("L15", "B14", "B13", r=3.2, rating=1100.0),
    Branch("L16", "B15", "B14", r=0.03, rating=4096.0),
    Branch("L17", "B16", "B15", r=0.03, rating=4096.0),
    Branch("L18", "B17", "B13", r=0.03, rating=4096.0),
    Branch("L19", "B18", "B17", r=0.03, rating=4096.0),
    Branch("L20", "B19", "B18", r=0.03, rating=4096.0),
    Branch("L21", "B20", "B19", r=0.03, rating=4096.0),
)


def standard_network() -> NetworkModel:
    """The 20-bus / 21-branch vessel distribution network."""
    return build_network(_STANDARD_BUSES, _STANDARD_BRANCHES)


# ---------------------------------------------------------------------------
# topology
# ---------------------------------------------------------------------------


def islands(net: NetworkModel) -> tuple[frozenset[str], ...]:
    """Connected components over live buses, ordered by lowest member id."""
    alive = [b.id for b in net.live_buses]
    adj: dict[str, set[str]] = {b: set() for b in alive}
    for br in net.live_branches:
        adj[br.from_bus].add(br.to_bus)
        adj[br.to_bus].add(br.from_bus)
    seen: set[str] = set()
    comps: list[frozenset[str]] = []
    for start in alive:
        if start in seen:
            continue
        stack, comp = [start], set()
        while stack:
            node = stack.pop()
            if node in comp:
                continue
            comp.add(node)
            stack.extend(adj[node] - comp)
        seen |= comp
        comps.append(frozenset(comp))
    comps.sort(key=lambda c: _bus_order(min(c, key=_bus_order)))
    return tuple(comps)


def _bus_order(bus_id: str) -> tuple[int, str]:
    digits = "".join(ch for ch in bus_id if ch.isdigit())
    return (int(digits) if digits else 10**9, bus_id)


def build_incidence(net: NetworkModel) -> np.ndarray:
    """Branch-bus incidence over live elements: +1 at from, -1 at to.

    One row per live branch, one column per live bus (model order).
    """
    bus_idx = {b.id: k for k, b in enumerate(net.live_buses)}
    rows = []
    for br in net.live_branches:
        row = np.zeros(len(bus_idx))
        row[bus_idx[br.from_bus]] = 1.0
        row[bus_idx[br.to_bus]] = -1.0
        rows.append(row)
    if not rows:
        return np.zeros((0, len(bus_idx)))
    return np.vstack(rows)


def default_slack(net: NetworkModel, island: frozenset[str]) -> str | None:
    """Lowest-numbered live generator bus; the ESS bus only as a fallback."""
    gens = sorted((b for b in net.live_buses
                   if b.id in island and b.kind == "generator"),
                  key=lambda b: _bus_order(b.id))
    if gens:
        return gens[0].id
    ess = sorted((b for b in net.live_buses if b.id in island and b.kind == "ess"),
                 key=lambda b: _bus_order(b.id))
    if ess:
        return ess[0].id
    return None


@lru_cache(maxsize=64)
def _topology(net: NetworkModel):
    """Per-island index maps and conductance matrices, cached per model."""
    isl = islands(net)
    per_island = []
    for comp in isl:
        order = sorted(comp, key=_bus_order)
        idx = {bid: k for k, bid in enumerate(order)}
        g = np.zeros((len(order), len(order)))
        for br in net.live_branches:
            if br.from_bus in comp:
                a, b = idx[br.from_bus], idx[br.to_bus]
                y = 1.0 / br.r_ohm
                g[a, a] += y
                g[b, b] += y
                g[a, b] -= y
                g[b, a] -= y
        per_island.append((order, idx, g))
    return isl, per_island


# ---------------------------------------------------------------------------
# bus impedance matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IslandImpedance:
    bus_ids: tuple[str, ...]
    slack: str
    z: np.ndarray                    # ohm; slack row/column identically zero
    g: np.ndarray                    # siemens Laplacian of the island


@dataclass(frozen=True)
class BusImpedanceMatrix:
    islands: tuple[IslandImpedance, ...]
    isolated: tuple[str, ...]


def build_zbus(net: NetworkModel, slack: Mapping[str, str] | None = None) -> BusImpedanceMatrix:
    """Per-island driving-point/transfer resistance matrices.

    ``z[i, j]`` is the shared resistive path between buses i and j looking
    back to the island slack (reference) bus; the slack row and column are
    zero.  Islands without any source bus cannot be referenced and raise
    ModelError.
    """
    isl, per_island = _topology(net)
    out = []
    for comp, (order, idx, g) in zip(isl, per_island):
        sl = slack.get(min(comp, key=_bus_order)) if slack else None
        sl = sl or default_slack(net, comp)
        if sl is None:
            raise ModelError(f"island {sorted(comp)} has no slack reference")
        k = idx[sl]
        keep = [i for i in range(len(order)) if i != k]
        z = np.zeros_like(g)
        if keep:
            g_red = g[np.ix_(keep, keep)]
            try:
                z_red = np.linalg.inv(g_red)
            except np.linalg.LinAlgError as exc:
                raise ModelError(f"singular island {sorted(comp)}") from exc
            z[np.ix_(keep, keep)] = z_red
        out.append(IslandImpedance(bus_ids=tuple(order), slack=sl, z=z, g=g.copy()))
    return BusImpedanceMatrix(islands=tuple(out), isolated=tuple(sorted(net.isolated)))


# ---------------------------------------------------------------------------
# power flow
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowSolution:
    bus_voltages: dict[str, float]       # pu
    branch_flows: dict[str, float]       # kW at the from-side, + from->to
    branch_currents: dict[str, float]    # pu on the system base
    total_losses: float                  # kW
    converged: bool
    iterations: int
    islands: tuple[frozenset[str], ...]
    slack_injections: dict[str, float]   # kW actually supplied by each slack
    residual_kw: float = 0.0


def dc_power_flow(
    net: NetworkModel,
    injections: Mapping[str, float],
    slack: str | Sequence[str] | None = None,
) -> FlowSolution:
    """Solve the resistive network for bus voltages given kW injections.

    Each island is solved by Newton iteration on the nodal power balance
    ``P_i = V_i * sum_j G_ij (V_i - V_j)``; the island slack bus holds its
    voltage setpoint and absorbs the loss imbalance.  Tolerance 0.1 kW on the
    worst bus mismatch, at most 50 iterations.
    """
    live_ids = {b.id for b in net.live_buses}
    for bid in injections:
        if bid not in live_ids:
            raise ModelError(f"injection at unknown bus {bid}")

    slack_set: set[str] = set()
    if isinstance(slack, str):
        slack_set = {slack}
    elif slack is not None:
        slack_set = set(slack)

    isl, per_island = _topology(net)
    bus_by_id = {b.id: b for b in net.buses}
    voltages: dict[str, float] = {}
    slack_inj: dict[str, float] = {}
    total_iter = 0
    worst_residual = 0.0

    for comp, (order, idx, g) in zip(isl, per_island):
        chosen = sorted(slack_set & comp, key=_bus_order)
        sl = chosen[0] if chosen else default_slack(net, comp)
        p = np.array([1e3 * injections.get(bid, 0.0) for bid in order])  # W
        if sl is None:
            if np.any(np.abs(p) > FLOW_TOL_KW * 1e3):
                raise IslandingError(
                    f"island {sorted(comp)} has injections but no source bus")
            v_flat = net.base_voltage
            for bid in order:
                voltages[bid] = v_flat
            continue

        k = idx[sl]
        v_sl = bus_by_id[sl].v_setpoint * net.base_voltage
        n = len(order)
        v = np.full(n, v_sl)
        keep = [i for i in range(n) if i != k]
        if not keep:
            # single-bus island: the slack can push nothing anywhere
            voltages[sl] = v_sl
            slack_inj[sl] = 0.0
            continue

        converged = False
        it = 0
        for it in range(1, MAX_ITERATIONS + 1):
            gv = g @ v
            f = v * gv - p                      # W mismatch, all buses
            fr = f[keep]
            # summed criterion bounds both the worst bus and the island total
            if np.sum(np.abs(fr)) < FLOW_TOL_KW * 1e3:
                converged = True
                break
            # J_ij = d f_i / d V_j = G_ij * V_i + delta_ij * (G v)_i
            jac = (g * v[:, None]) + np.diag(gv)
            jr = jac[np.ix_(keep, keep)]
            try:
                dv = np.linalg.solve(jr, -fr)
            except np.linalg.LinAlgError as exc:
                raise NumericError(
                    f"singular Jacobian in island {sorted(comp)}",
                    residual_kw=float(np.max(np.abs(fr)) / 1e3)) from exc
            v[keep] += dv
        total_iter += it
        if not converged:
            raise NumericError(
                f"flow did not converge in island {sorted(comp)}",
                residual_kw=float(np.max(np.abs(f[keep])) / 1e3))
        worst_residual = max(worst_residual, float(np.max(np.abs(f[keep])) / 1e3))
        for bid in order:
            voltages[bid] = float(v[idx[bid]])
        slack_inj[sl] = float((v * (g @ v))[k]) / 1e3

    # branch quantities
    flows: dict[str, float] = {}
    currents: dict[str, float] = {}
    losses = 0.0
    i_base = net.base_power * 1e3 / net.base_voltage
    for br in net.live_branches:
        vf, vt = voltages[br.from_bus], voltages[br.to_bus]
        i = (vf - vt) / br.r_ohm
        flows[br.id] = vf * i / 1e3
        currents[br.id] = i / i_base
        losses += i * i * br.r_ohm / 1e3

    return FlowSolution(
        bus_voltages={bid: v / net.base_voltage for bid, v in voltages.items()},
        branch_flows=flows,
        branch_currents=currents,
        total_losses=losses,
        converged=True,
        iterations=total_iter,
        islands=isl,
        slack_injections=slack_inj,
        residual_kw=worst_residual,
    )


# ---------------------------------------------------------------------------
# limit checking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    constraint: str                  # e.g. generator-overload, branch-overload
    subject: str                     # unit / bus / branch id
    margin: float                    # how far past the limit (limit units)
    detail: str = ""


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def of(self, constraint: str) -> tuple[Violation, ...]:
        return tuple(v for v in self.violations if v.constraint == constraint)


def check_limits(
    net: NetworkModel,
    flow: FlowSolution | None = None,
    schedule: object | None = None,
    unit_rating_kw: float = 2048.0,
    ess_rating_kw: float = 820.0,
) -> ViolationReport:
    """Report every violated operating limit with its margin.

    ``schedule`` is duck-typed: optional attributes ``gen_kw`` (mapping of
    unit name to kW), ``ess_kw`` (float) and ``shed_kw`` (float) are checked
    when present.  Flow-side checks cover bus-voltage bands and branch loading
    against the derated rating.  Report-only: never raises.
    """
    found: list[Violation] = []

    if schedule is not None:
        gen_kw = getattr(schedule, "gen_kw", None)
        if gen_kw:
            for unit, p in gen_kw.items():
                if p > unit_rating_kw:
                    found.append(Violation(
                        "generator-overload", unit, p - unit_rating_kw,
                        f"{p:.1f} kW against a {unit_rating_kw:.0f} kW unit rating"))
                if p < 0:
                    found.append(Violation(
                        "generator-reverse", unit, -p, "negative dispatch"))
        ess_kw = getattr(schedule, "ess_kw", None)
        if ess_kw is not None and abs(ess_kw) > ess_rating_kw:
            found.append(Violation(
                "ess-overload", "ESS", abs(ess_kw) - ess_rating_kw,
                f"|{ess_kw:.1f}| kW against the {ess_rating_kw:.0f} kW rating"))
        shed_kw = getattr(schedule, "shed_kw", None)
        if shed_kw is not None and shed_kw < 0:
            found.append(Violation("shed-negative", "shed", -shed_kw,
                                   "shed quantity cannot be negative"))

    if flow is not None:
        for bid, v_pu in flow.bus_voltages.items():
            bus = net.bus(bid)
            if v_pu > bus.v_max + 1e-9:
                found.append(Violation("bus-overvoltage", bid, v_pu - bus.v_max,
                                       f"{v_pu:.4f} pu above {bus.v_max}"))
            elif v_pu < bus.v_min - 1e-9:
                found.append(Violation("bus-undervoltage", bid, bus.v_min - v_pu,
                                       f"{v_pu:.4f} pu below {bus.v_min}"))
        by_id = {br.id: br for br in net.live_branches}
        for brid, p_kw in flow.branch_flows.items():
            br = by_id[brid]
            loading = abs(p_kw)      # kVA-equivalent on the DC side
            if loading > br.limit_kva:
                found.append(Violation(
                    "branch-overload", brid, loading - br.limit_kva,
                    f"{loading:.1f} kVA against {br.rating:.0f} x "
                    f"{br.derating_factor:.2f} derated"))

    return ViolationReport(tuple(found))
