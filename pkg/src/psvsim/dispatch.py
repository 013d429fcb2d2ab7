"""Fuel-optimal generation scheduling on the DC bus.

The scheduler splits the connected plant into islands, dispatches the diesel
fleet at SFOC-optimal operating points subject to power balance, converter
ratings, storage limits and a spinning-reserve policy, and falls back to a
staged overload relaxation when a degraded plant cannot carry the demand
inside ratings.  Identical online units at identical ratings receive equal
dispatch; storage covers the generator headroom the reserve policy demands
and is otherwise priced out of steady-state service.

Stages, in order, per island:

1. normal      -- units inside nameplate, storage inside its dispatch band,
                  spinning reserve honored when attainable;
2. relaxed     -- units fill to the calibrated top of the fuel map and the
                  battery absorbs the remainder without regard to its band
                  (flagged), or, with no battery available, units stretch to
                  the 130 % emergency ceiling;
3. shed        -- mission-priority load shedding covers what the emergency
                  ceiling cannot;
4. infeasible  -- the residual is reported against a least-violation dispatch.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import NetworkModel, Violation, islands as grid_islands
from .loads import LoadUnit, MissionProfile, ShedPlan, mission_profile, shed_plan
from .powertrain import RATED_SPEED_RPM, SfocMap, default_sfoc_map
from .storage import EssUnit, charge_mode_select, ess_dispatch_limits

GEN_RATED_KW = 2048.0
ESS_RATING_KW = 820.0
DEFAULT_RESERVE_KW = 690.0       # spinning generator headroom the EMS holds
RELAXED_CEILING_FACTOR = 1.30    # short-time emergency unit ceiling
ENGAGEMENT_TOP_KW = 1975.0       # top of the calibrated fuel map; relaxed fill level
SCAN_STEP_KW = 1.0
IDLE_SPEED_RPM = 900.0

SCHEDULE_MODES = ("feasible", "overload-relaxed", "infeasible")


class InfeasibleProblemError(ValueError):
    """The problem is structurally unsolvable (e.g. a loaded island without
    any generation or storage attached)."""


# ---------------------------------------------------------------------------
# fleet
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GenUnit:
    """One diesel-generator set behind its bus converter."""
    id: str
    bus: str
    p_rated: float = GEN_RATED_KW    # kW, nameplate
    online: bool = True

    def __post_init__(self) -> None:
        if self.p_rated <= 0:
            raise ValueError(f"{self.id}: rating must be positive")


def standard_fleet() -> tuple[GenUnit, ...]:
    """Four identical sets, two per main switchboard section."""
    return (
        GenUnit("GEN1", "B1"),
        GenUnit("GEN2", "B2"),
        GenUnit("GEN3", "B1"),
        GenUnit("GEN4", "B2"),
    )


# ---------------------------------------------------------------------------
# problem container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Control:
    """One scheduling decision variable with finite box bounds [kW]."""
    name: str
    kind: str                        # "gen" | "ess"
    unit: str                        # unit id it drives
    island: int                      # index into OpfProblem.islands
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"{self.name}: bounds must be finite")
        if self.lo > self.hi:
            raise ValueError(f"{self.name}: empty bound interval")


@dataclass(frozen=True, eq=False)
class OpfProblem:
    """Scheduling problem in standard form.

    ``u`` collects the controls (per-unit generator powers plus the storage
    battery contribution); ``x`` the fixed parameters the schedule responds
    to.  Linear structure: ``j_e @ u == o_e`` (island balances) and
    ``j_i @ u <= o_i`` (bus-converter throughput boards).  ``w_nl``/``q_nl``
    hold nonlinear constraint callables (none for this plant).  The objective
    is fuel mass flow plus priced storage energy, in kg/h.
    """
    network: NetworkModel
    gens: tuple[GenUnit, ...]
    ess: EssUnit | None
    loads: tuple[LoadUnit, ...]
    mission: MissionProfile
    relaxation: str                      # "none" | "overload"
    x: Mapping[str, float]
    controls: tuple[Control, ...]
    j_e: np.ndarray = field(repr=False)
    o_e: np.ndarray = field(repr=False)
    j_i: np.ndarray = field(repr=False)
    o_i: np.ndarray = field(repr=False)
    islands: tuple[frozenset[str], ...]
    island_load_kw: tuple[float, ...]    # gross demand per island, >= 0
    pv_kw: float                         # must-run PV injection at the ESS bus
    f_p: float                           # storage energy price, g/kWh
    reserve_kw: float
    horizon_s: float
    ess_mode: str                        # baseline storage mode for the period
    grid_allows_fast: bool
    degraded: bool                       # any configured unit offline/isolated
    sfoc_map: SfocMap = field(repr=False)
    w_nl: tuple[Callable[[np.ndarray], float], ...] = ()
    q_nl: tuple[float, ...] = ()

    @property
    def u_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.controls)

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return tuple((c.lo, c.hi) for c in self.controls)

    def objective(self, u: Sequence[float]) -> float:
        """Total fuel mass flow plus priced storage discharge [kg/h]."""
        u = np.asarray(u, dtype=float)
        if u.shape != (len(self.controls),):
            raise ValueError(
                f"expected {len(self.controls)} controls, got shape {u.shape}")
        total = 0.0
        for c, val in zip(self.controls, u):
            if c.kind == "gen":
                total += float(self.sfoc_map.fuel_rate_many(max(val, 0.0)))
            else:
                total += self.f_p * max(val, 0.0) / 1000.0
        return total


def _load_by_bus(loads: Iterable[LoadUnit]) -> dict[str, float]:
    acc: dict[str, float] = {}
    for u in loads:
        acc[u.bus] = acc.get(u.bus, 0.0) - u.current_setpoint   # demand > 0
    return acc


def build_opf(
    network: NetworkModel,
    gens: Iterable[GenUnit],
    ess: EssUnit | None,
    loads: Iterable[LoadUnit],
    mission: MissionProfile | str,
    relaxation: str = "none",
    *,
    pv_kw: float = 0.0,
    reserve_kw: float = DEFAULT_RESERVE_KW,
    horizon_s: float = 900.0,
    grid_allows_fast: bool = False,
    sfoc_map: SfocMap | None = None,
) -> OpfProblem:
    """Assemble the scheduling problem for the present plant state.

    Controls are one per configured generator (bounds collapse to [0, 0] for
    units that are offline or sit on a dead island) plus one battery-power
    control when storage is fitted.  The storage energy price comes from the
    unit's ``f_p`` when set, otherwise from the marginal fuel cost of the
    cheapest running set at the pre-assist loading.
    """
    if relaxation not in ("none", "overload"):
        raise ValueError(f"unknown relaxation {relaxation!r}")
    if isinstance(mission, str):
        mission = mission_profile(mission)
    gens = tuple(gens)
    loads = tuple(loads)
    if pv_kw < 0:
        raise ValueError("pv injection must be non-negative")

    isl = grid_islands(network)
    bus_island = {b: k for k, c in enumerate(isl) for b in c}
    demand = _load_by_bus(loads)
    for bus in demand:
        if bus not in bus_island:
            raise InfeasibleProblemError(f"load on unmodeled bus {bus}")

    island_load = [0.0] * len(isl)
    for bus, val in demand.items():
        island_load[bus_island[bus]] += val

    ceiling = RELAXED_CEILING_FACTOR if relaxation == "overload" else 1.0

    # storage baseline mode for the scheduling period
    ess_mode = "idle"
    band = (0.0, 0.0)
    if ess is not None:
        if ess.bus not in bus_island:
            raise InfeasibleProblemError(f"storage on unmodeled bus {ess.bus}")
        sp = charge_mode_select(
            ess, ess.battery.soc, pv_kw, grid_allows_fast)
        ess_mode = sp.mode
        band = ess_dispatch_limits(ess, horizon_s)

    controls: list[Control] = []
    for g in gens:
        live = g.online and g.bus in bus_island
        k = bus_island.get(g.bus, 0)
        # a live unit on an unloaded, storage-free island has nothing to
        # serve: collapse its admissible band so the structure says so
        islanded_dark = (
            live
            and island_load[k] == 0.0
            and not (ess is not None and bus_island.get(ess.bus) == k)
        )
        hi = 0.0 if (not live or islanded_dark) else g.p_rated * ceiling
        controls.append(Control(f"p:{g.id}", "gen", g.id, k, 0.0, hi))
    if ess is not None:
        k = bus_island[ess.bus]
        if ess_mode == "discharge":
            lo, hi = 0.0, max(band[1] - pv_kw, 0.0)
        elif ess_mode == "fast-charge":
            lo = hi = -(abs(band[0]) + pv_kw) if band[0] < 0 else -pv_kw
        elif ess_mode == "pv-charge":
            lo = hi = -pv_kw
        else:                        # idle: battery holds, PV passes through
            lo = hi = 0.0
        controls.append(Control("p:ESS", "ess", "ESS", k, lo, hi))

    # structural check: every loaded island needs a source
    for k, li in enumerate(island_load):
        if li > 1e-9 and not any(
                c.island == k and c.hi > 0.0 for c in controls):
            raise InfeasibleProblemError(
                f"island {sorted(isl[k])} carries {li:.1f} kW with no "
                "dispatchable generation or storage")

    # balance rows: one per island that owns at least one control
    row_islands = sorted({c.island for c in controls})
    j_e = np.zeros((len(row_islands), len(controls)))
    o_e = np.zeros(len(row_islands))
    for r, k in enumerate(row_islands):
        for j, c in enumerate(controls):
            if c.island == k:
                j_e[r, j] = 1.0
        o_e[r] = island_load[k]
        if ess is not None and bus_island.get(ess.bus) == k:
            o_e[r] -= pv_kw          # must-run PV serves its island first

    # converter throughput boards: one row per generator bus in service
    gen_buses = sorted({g.bus for g in gens if g.online and g.bus in bus_island})
    j_i = np.zeros((len(gen_buses), len(controls)))
    o_i = np.zeros(len(gen_buses))
    for r, bus in enumerate(gen_buses):
        for j, c in enumerate(controls):
            if c.kind == "gen" and any(
                    g.id == c.unit and g.bus == bus for g in gens):
                j_i[r, j] = 1.0
        o_i[r] = network.bus(bus).p_max * ceiling

    smap = sfoc_map if sfoc_map is not None else default_sfoc_map()

    # storage energy price: explicit, else the marginal fuel cost of the
    # cheapest running set at the no-assist loading (identical sets: any)
    if ess is not None and ess.f_p is not None:
        f_p = float(ess.f_p)
    else:
        n_live = sum(1 for c in controls if c.kind == "gen" and c.hi > 0)
        total_load = sum(island_load) - pv_kw
        if n_live and total_load > 0:
            p_warm = min(max(total_load / n_live, 1.0), GEN_RATED_KW)
            dp = 1.0
            f_lo, f_hi = smap.fuel_rate_many(
                np.array([max(p_warm - dp, 0.5), p_warm + dp]))
            f_p = (f_hi - f_lo) / (2 * dp) * 1000.0     # kg/h/kW -> g/kWh
        else:
            f_p = 0.0

    degraded = any(
        (not g.online) or (g.bus in network.isolated) or g.bus not in bus_island
        for g in gens)

    x = {f"load:{bus}": -val for bus, val in sorted(demand.items())}
    x.update({
        "pv_kw": pv_kw,
        "soc": ess.battery.soc if ess is not None else 0.0,
        "reserve_kw": reserve_kw,
        "f_p": f_p,
        "horizon_s": horizon_s,
    })

    return OpfProblem(
        network=network, gens=gens, ess=ess, loads=loads, mission=mission,
        relaxation=relaxation, x=x, controls=tuple(controls),
        j_e=j_e, o_e=o_e, j_i=j_i, o_i=o_i,
        islands=isl, island_load_kw=tuple(island_load),
        pv_kw=pv_kw, f_p=f_p, reserve_kw=reserve_kw, horizon_s=horizon_s,
        ess_mode=ess_mode, grid_allows_fast=grid_allows_fast,
        degraded=degraded, sfoc_map=smap,
    )


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """One scheduling period's dispatch decision.

    ``gen_kw`` covers every configured unit (0.0 when stopped); ``omega_ref``
    carries the fuel-optimal speed reference per unit with 0.0 as the stop
    sentinel.  ``ess_kw`` is the storage terminal power (battery plus PV).
    A ``feasible`` schedule carries no violations by construction.
    """
    gen_kw: Mapping[str, float]
    omega_ref: Mapping[str, float]
    ess_kw: float
    ess_mode: str
    shed: ShedPlan | None
    objective: float                 # kg/h, as optimized
    mode: str                        # feasible | overload-relaxed | infeasible
    violations: tuple[Violation, ...]
    solve_time: float

    def __post_init__(self) -> None:
        if self.mode not in SCHEDULE_MODES:
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "feasible" and self.violations:
            raise ValueError("a feasible schedule cannot carry violations")

    @property
    def shed_kw(self) -> float:
        return self.shed.total_shed if self.shed is not None else 0.0

    @property
    def total_generation_kw(self) -> float:
        return sum(self.gen_kw.values()) + max(self.ess_kw, 0.0)


# ---------------------------------------------------------------------------
# per-island solve
# ---------------------------------------------------------------------------


@dataclass
class _IslandCtx:
    index: int
    unit_ids: list[str]              # dispatchable gen units, build order
    n: int                           # len(unit_ids)
    unit_cap: float                  # nameplate per unit (identical sets)
    load_kw: float                   # gross demand
    has_ess: bool
    pv_kw: float
    e_lo: float                      # battery control bounds
    e_hi: float
    e_pinned: bool                   # charge/idle modes pin the battery power
    loads: list[LoadUnit]


def _island_contexts(problem: OpfProblem) -> list[_IslandCtx]:
    bus_island = {b: k for k, c in enumerate(problem.islands) for b in c}
    by_island_loads: dict[int, list[LoadUnit]] = {}
    for u in problem.loads:
        by_island_loads.setdefault(bus_island[u.bus], []).append(u)

    ctxs: dict[int, _IslandCtx] = {}

    def ctx(k: int) -> _IslandCtx:
        if k not in ctxs:
            ctxs[k] = _IslandCtx(
                index=k, unit_ids=[], n=0, unit_cap=GEN_RATED_KW,
                load_kw=problem.island_load_kw[k], has_ess=False, pv_kw=0.0,
                e_lo=0.0, e_hi=0.0, e_pinned=True,
                loads=by_island_loads.get(k, []))
        return ctxs[k]

    for c in problem.controls:
        cc = ctx(c.island)
        if c.kind == "gen":
            if c.hi > 0.0:
                cc.unit_ids.append(c.unit)
                g = next(g for g in problem.gens if g.id == c.unit)
                cc.unit_cap = g.p_rated
        else:
            cc.has_ess = True
            cc.pv_kw = problem.pv_kw
            cc.e_lo, cc.e_hi = c.lo, c.hi
            cc.e_pinned = c.lo == c.hi
    for k in range(len(problem.islands)):
        if problem.island_load_kw[k] > 0 or k in ctxs:
            cc = ctx(k)
            cc.n = len(cc.unit_ids)
    return [ctxs[k] for k in sorted(ctxs)]


@dataclass
class _IslandResult:
    p_unit: float                    # equal dispatch per running unit
    unit_ids: list[str]
    e_batt: float                    # battery contribution, kW
    e_term: float                    # terminal = battery + pv
    fuel: float                      # objective contribution, kg/h
    relaxed: bool
    reserve_unmet: bool
    shed: ShedPlan | None
    residual_kw: float
    violations: list[Violation]


def _fuel_of(problem: OpfProblem, n: int, p: float, e_batt: float) -> float:
    f = n * float(problem.sfoc_map.fuel_rate_many(max(p, 0.0)))
    return f + problem.f_p * max(e_batt, 0.0) / 1000.0


def _solve_island(problem: OpfProblem, cc: _IslandCtx,
                  step_kw: float) -> _IslandResult:
    """Staged equal-dispatch solve of one island."""
    n, load = cc.n, cc.load_kw
    l_net = load - cc.pv_kw           # what units plus battery must carry
    cap = cc.unit_cap
    res = _IslandResult(
        p_unit=0.0, unit_ids=cc.unit_ids, e_batt=0.0, e_term=cc.pv_kw,
        fuel=0.0, relaxed=False, reserve_unmet=False, shed=None,
        residual_kw=0.0, violations=[])

    if n == 0:
        # storage-only island (or dark island): battery carries what it can
        e = min(max(l_net, cc.e_lo), cc.e_hi)
        res.e_batt, res.e_term = e, e + cc.pv_kw
        res.fuel = problem.f_p * max(e, 0.0) / 1000.0
        short = l_net - e
        if short > 1e-6:
            plan = shed_plan(problem.mission, short, cc.loads)
            res.shed = plan
            if plan.insufficient:
                res.residual_kw = plan.residual_kw
                res.violations.append(Violation(
                    "unserved-load", f"island-{cc.index}", plan.residual_kw,
                    f"{plan.residual_kw:.1f} kW unserved after shedding"))
        return res

    # -- stage 1: normal -----------------------------------------------------
    need = l_net - (n * cap - problem.reserve_kw)    # battery power the
    # reserve policy calls for so the running sets keep their headroom
    e_lo, e_hi = cc.e_lo, cc.e_hi
    if not cc.e_pinned:
        if need > e_hi + 1e-9:
            res.reserve_unmet = True
            e_lo = e_hi                              # maximum assist
        else:
            e_lo = min(max(e_lo, need, 0.0), e_hi)
    else:
        if need > e_hi + 1e-9:
            res.reserve_unmet = True

    def p_of(e: float) -> float:
        return (l_net - e) / n

    if p_of(e_hi) <= cap + 1e-9 and p_of(e_lo) >= -1e-9:
        # feasible inside ratings: scan the battery axis at fixed grid
        # resolution, then polish around the best cell
        lo = max(e_lo, l_net - n * cap)
        hi = min(e_hi, l_net)                        # units never motor
        hi = max(hi, lo)
        e_grid = np.arange(lo, hi + step_kw / 2, step_kw)
        if e_grid.size == 0 or e_grid[-1] < hi - 1e-9:
            e_grid = np.append(e_grid, hi)
        p_grid = (l_net - e_grid) / n
        obj = n * problem.sfoc_map.fuel_rate_many(np.maximum(p_grid, 0.0)) \
            + problem.f_p * np.maximum(e_grid, 0.0) / 1000.0
        # ties resolve to the largest storage assist (deterministic)
        k = obj.size - 1 - int(np.argmin(obj[::-1]))
        e_best, f_best = float(e_grid[k]), float(obj[k])
        if hi > lo:
            br = minimize_scalar(
                lambda e: _fuel_of(problem, n, p_of(e), e),
                bounds=(max(lo, e_best - step_kw), min(hi, e_best + step_kw)),
                method="bounded", options={"xatol": 1e-6})
            if br.success and br.fun < f_best - 1e-12:
                e_best, f_best = float(br.x), float(br.fun)
        res.e_batt, res.e_term = e_best, e_best + cc.pv_kw
        res.p_unit = max(p_of(e_best), 0.0)
        res.fuel = f_best
        return res

    # -- stage 2: overload relaxation -----------------------------------------
    res.relaxed = True
    res.reserve_unmet = True
    battery_live = (not cc.e_pinned) and cc.e_hi > 0.0
    if battery_live:
        # units hold the calibrated top of the fuel map; the battery takes
        # the remainder, outside its band if the deficit says so (flagged)
        p = min(max(l_net, 0.0) / n, ENGAGEMENT_TOP_KW)
        e = l_net - n * p
        res.p_unit, res.e_batt, res.e_term = p, e, e + cc.pv_kw
        res.fuel = _fuel_of(problem, n, p, e)
        if res.e_term > ESS_RATING_KW + 1e-6:
            res.violations.append(Violation(
                "ess-over-band", "ESS", res.e_term - ESS_RATING_KW,
                f"{res.e_term:.1f} kW terminal against the "
                f"{ESS_RATING_KW:.0f} kW rating"))
        return res

    # no battery to lean on: stretch the units to the emergency ceiling
    e_pin = min(max(l_net - n * cap, cc.e_lo), cc.e_hi)   # pinned charge draw
    l_units = l_net - e_pin
    ceiling = cap * RELAXED_CEILING_FACTOR
    if l_units / n <= ceiling + 1e-9:
        p = l_units / n
        res.p_unit, res.e_batt, res.e_term = p, e_pin, e_pin + cc.pv_kw
        res.fuel = _fuel_of(problem, n, p, e_pin)
        if p > cap + 1e-6:
            res.violations.append(Violation(
                "generator-overload", ",".join(cc.unit_ids), p - cap,
                f"{p:.1f} kW against the {cap:.0f} kW nameplate"))
        return res

    # -- stage 3: shed --------------------------------------------------------
    deficit = l_units - n * ceiling
    plan = shed_plan(problem.mission, deficit, cc.loads)
    res.shed = plan
    l_after = l_units - plan.total_shed
    p = min(l_after / n, ceiling)
    res.p_unit, res.e_batt, res.e_term = p, e_pin, e_pin + cc.pv_kw
    res.fuel = _fuel_of(problem, n, p, e_pin)
    if p > cap + 1e-6:
        res.violations.append(Violation(
            "generator-overload", ",".join(cc.unit_ids), p - cap,
            f"{p:.1f} kW against the {cap:.0f} kW nameplate"))

    # -- stage 4: honest infeasibility ----------------------------------------
    if plan.insufficient:
        res.residual_kw = plan.residual_kw
        res.violations.append(Violation(
            "unserved-load", f"island-{cc.index}", plan.residual_kw,
            f"{plan.residual_kw:.1f} kW unserved at the emergency ceiling "
            "after exhausting the shed list"))
    return res


def _merge_shed(plans: list[ShedPlan]) -> ShedPlan | None:
    plans = [p for p in plans if p is not None]
    if not plans:
        return None
    if len(plans) == 1:
        return plans[0]
    entries = tuple(e for p in plans for e in p.entries)
    residual = sum(p.residual_kw for p in plans)
    return ShedPlan(
        entries=entries,
        total_shed=sum(p.total_shed for p in plans),
        insufficient=any(p.insufficient for p in plans),
        residual_kw=residual,
        advisory="; ".join(p.advisory for p in plans if p.advisory),
    )


def solve_opf(problem: OpfProblem, *, step_kw: float = SCAN_STEP_KW) -> Schedule:
    """Dispatch the plant for one scheduling period.

    Deterministic: equal dispatch across identical online units per island, a
    fixed-resolution scan with bounded polish on the storage axis, and
    rule-based relaxation stages.  The returned mode is ``feasible`` only when
    every rating, band and the reserve policy held (a reserve shortfall on an
    intact fleet is reported by :func:`reserve_check`, not flagged here).
    """
    t0 = time.perf_counter()
    if step_kw <= 0:
        raise ValueError("scan step must be positive")

    results = [_solve_island(problem, cc, step_kw)
               for cc in _island_contexts(problem)]

    gen_kw = {g.id: 0.0 for g in problem.gens}
    for r in results:
        for uid in r.unit_ids:
            gen_kw[uid] = r.p_unit
    omega_ref = {
        uid: (problem.sfoc_map.optimized_speed(p) if p > 0 else 0.0)
        for uid, p in gen_kw.items()
    }
    e_term = sum(r.e_term for r in results) if problem.ess is not None else 0.0
    violations = [v for r in results for v in r.violations]
    relaxed = any(r.relaxed for r in results)
    reserve_unmet = any(r.reserve_unmet for r in results)
    residual = sum(r.residual_kw for r in results)

    over_rating = any(p > GEN_RATED_KW + 1e-6 for p in gen_kw.values())
    ess_over = e_term > ESS_RATING_KW + 1e-6
    if residual > 1e-6:
        mode = "infeasible"
    elif relaxed or over_rating or ess_over or (
            reserve_unmet and problem.degraded):
        mode = "overload-relaxed"
    else:
        mode = "feasible"

    if mode == "overload-relaxed" and reserve_unmet and not any(
            v.constraint == "reserve-shortfall" for v in violations):
        violations.append(Violation(
            "reserve-shortfall", "fleet", 0.0,
            f"spinning reserve below the {problem.reserve_kw:.0f} kW policy"))
    if mode == "feasible":
        violations = []

    return Schedule(
        gen_kw=gen_kw,
        omega_ref=omega_ref,
        ess_kw=e_term,
        ess_mode=problem.ess_mode,
        shed=_merge_shed([r.shed for r in results]),
        objective=sum(r.fuel for r in results),
        mode=mode,
        violations=tuple(violations),
        solve_time=time.perf_counter() - t0,
    )


def speed_setpoints(schedule: Schedule,
                    zero_dispatch: str = "stop") -> dict[str, float]:
    """Per-unit speed references [rpm] for the governor layer.

    Units without load either stop (0.0 sentinel) or hold idle speed,
    per ``zero_dispatch`` ("stop" | "idle").
    """
    if zero_dispatch not in ("stop", "idle"):
        raise ValueError(f"unknown zero-dispatch policy {zero_dispatch!r}")
    fallback = 0.0 if zero_dispatch == "stop" else IDLE_SPEED_RPM
    return {
        uid: (w if w > 0 else fallback)
        for uid, w in schedule.omega_ref.items()
    }


# ---------------------------------------------------------------------------
# candidate-point enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuboptimalPoint:
    """One admissible operating point of the storage-coupled island.

    Per-unit power and the fuel-optimal speed it implies; ``sfoc`` is the
    per-unit figure at that speed.  ``classification`` is "global" for the
    scheduled optimum (and for every point when the objective is flat within
    tolerance) and "local" for the alternatives.
    """
    label: str
    p_gen: tuple[float, ...]         # per running unit, kW
    p_ess: float                     # terminal, kW
    omega_pu: float                  # optimized speed / rated speed
    sfoc: float                      # g/kWh at the optimized speed
    objective: float                 # kg/h, solver objective
    classification: str              # "global" | "local"
    delta_kw: float                  # sampled neighborhood radius


def _primary_island(problem: OpfProblem) -> _IslandCtx:
    ctxs = _island_contexts(problem)
    if not ctxs:
        raise InfeasibleProblemError("problem has no dispatchable island")
    with_ess = [c for c in ctxs if c.has_ess]
    if with_ess:
        return with_ess[0]
    return max(ctxs, key=lambda c: c.load_kw)


def enumerate_suboptimal(
    problem: OpfProblem,
    schedule: Schedule | None = None,
    grid: float = 25.0,
) -> tuple[SuboptimalPoint, ...]:
    """Enumerate admissible schedule candidates on the storage-coupled island.

    Candidates: the fresh optimum of ``problem`` (classified global), the
    incumbent schedule's storage assist held constant, the storage-free
    dispatch, and every interior local minimum of the objective along the
    storage axis sampled at ``grid`` kW.  Each point sits on the optimized
    speed curve, where the speed direction is a strict local minimum of the
    fuel surface by construction.  A flat objective (within 1e-3 kg/h across
    the scan) classifies every candidate global.
    """
    if grid <= 0:
        raise ValueError("grid resolution must be positive")
    cc = _primary_island(problem)
    n = cc.n
    if n == 0:
        raise InfeasibleProblemError("no running units on the primary island")
    l_net = cc.load_kw - cc.pv_kw
    smap = problem.sfoc_map

    solved = solve_opf(problem)
    e_solved = solved.ess_kw - cc.pv_kw if cc.has_ess else 0.0

    e_cap = min(l_net, max(cc.e_hi, e_solved,
                           (schedule.ess_kw - cc.pv_kw) if schedule else 0.0))
    e_cap = max(e_cap, 0.0)

    def point(label: str, e_batt: float, classification: str) -> SuboptimalPoint | None:
        p = (l_net - e_batt) / n
        if p < -1e-9 or p > cc.unit_cap * RELAXED_CEILING_FACTOR + 1e-9:
            return None
        p = max(p, 0.0)
        w = smap.optimized_speed(p) if p > 0 else 0.0
        s = smap.sfoc(p, w) if p > 0 else 0.0
        return SuboptimalPoint(
            label=label,
            p_gen=tuple(p for _ in range(n)),
            p_ess=e_batt + cc.pv_kw,
            omega_pu=w / RATED_SPEED_RPM,
            sfoc=s,
            objective=_fuel_of(problem, n, p, e_batt),
            classification=classification,
            delta_kw=grid,
        )

    named: list[SuboptimalPoint] = []
    pt = point("scheduled", e_solved, "global")
    if pt is not None:
        named.append(pt)
    if schedule is not None:
        e_inc = min(max(schedule.ess_kw - cc.pv_kw, 0.0), l_net)
        pt = point("incumbent-ess", e_inc, "local")
        if pt is not None:
            named.append(pt)
    pt = point("no-ess", 0.0, "local")
    if pt is not None:
        named.append(pt)
    if (problem.grid_allows_fast and problem.ess is not None
            and problem.ess_mode == "fast-charge"):
        pt = point("fast-charge", cc.e_lo, "local")
        if pt is not None:
            named.append(pt)

    # storage-axis scan for interior local minima
    locals_found: list[SuboptimalPoint] = []
    flat = False
    if e_cap > 0:
        e_grid = np.arange(0.0, e_cap + grid / 2, grid)
        p_grid = np.maximum((l_net - e_grid) / n, 0.0)
        obj = n * smap.fuel_rate_many(p_grid) \
            + problem.f_p * np.maximum(e_grid, 0.0) / 1000.0
        flat = float(obj.max() - obj.min()) < 1e-3
        if not flat and obj.size >= 3:
            interior = np.flatnonzero(
                (obj[1:-1] < obj[:-2] - 1e-9) & (obj[1:-1] < obj[2:] - 1e-9)) + 1
            for k in interior:
                pt = point(f"scan:{e_grid[k]:.0f}kW", float(e_grid[k]), "local")
                if pt is not None:
                    locals_found.append(pt)

    out: list[SuboptimalPoint] = []
    for cand in named + locals_found:
        if any(abs(cand.p_ess - kept.p_ess) < max(grid / 2, 0.5)
               for kept in out):
            continue
        out.append(cand)
    if flat:
        out = [replace(p, classification="global") for p in out]
    return tuple(out)


# ---------------------------------------------------------------------------
# treatment of a schedule handover
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryPoint:
    t_s: float
    p_ess: float                     # terminal, kW
    p_gen: float                     # per running unit, kW
    omega_rpm: float                 # slew-limited physical speed
    sfoc: float                      # g/kWh at (p_gen, omega)
    soc: float


@dataclass(frozen=True)
class RampPlan:
    points: tuple[TrajectoryPoint, ...]
    truncated: bool = False
    events: tuple[str, ...] = ()


def treat_suboptimal(
    points: Sequence[SuboptimalPoint],
    ess: EssUnit | None,
    ramp_limit: float = 50.0,
    *,
    speed_slew_rpm_s: float = 300.0,
    period_s: float = 0.5,
    start: Schedule | None = None,
    sfoc_map: SfocMap | None = None,
) -> RampPlan:
    """Plan the storage ramp that walks the plant onto the global candidate.

    The battery moves at most ``ramp_limit`` kW per second toward the global
    point's storage assist while the running units track the balance; engine
    speed follows the fuel-optimal reference under a slew limit, so the fuel
    figure along the path reflects the physical deceleration.  The plan
    truncates with an event if the pack hits its SOC floor en route.  An
    infinite ramp limit gives the single-step handover; a no-change target
    gives the identity plan.
    """
    if ramp_limit <= 0:
        raise ValueError("ramp limit must be positive")
    if period_s <= 0:
        raise ValueError("period must be positive")
    smap = sfoc_map if sfoc_map is not None else default_sfoc_map()
    target = next((p for p in points if p.classification == "global"), None)
    if target is None:
        raise ValueError("no global candidate among the points")
    n = len(target.p_gen)
    if n == 0:
        raise ValueError("target runs no units")
    l_net = sum(target.p_gen) + target.p_ess

    if start is not None:
        e0 = start.ess_kw
        w0 = max((w for w in start.omega_ref.values() if w > 0), default=0.0)
    else:
        incumbent = next((p for p in points if p.label == "incumbent-ess"),
                         target)
        e0 = incumbent.p_ess
        w0 = incumbent.omega_pu * RATED_SPEED_RPM

    soc = ess.battery.soc if ess is not None else 1.0
    floor = ess.battery.soc_min if ess is not None else 0.0
    energy = ess.battery.energy_kwh if ess is not None else math.inf

    def make_point(t: float, e: float, w: float, soc_now: float) -> TrajectoryPoint:
        p = max((l_net - e) / n, 0.0)
        s = smap.sfoc(p, w) if p > 0 else 0.0
        return TrajectoryPoint(t_s=t, p_ess=e, p_gen=p, omega_rpm=w,
                               sfoc=s, soc=soc_now)

    def w_ref(e: float) -> float:
        p = max((l_net - e) / n, 0.0)
        return smap.optimized_speed(p) if p > 0 else 0.0

    e_target = target.p_ess
    w_start = w0 if w0 > 0 else w_ref(e0)

    if not math.isfinite(ramp_limit) or abs(e0 - e_target) < 1e-9:
        pts = [make_point(0.0, e0, w_start, soc)]
        if abs(e0 - e_target) >= 1e-9:
            pts.append(make_point(period_s, e_target, w_ref(e_target), soc))
        return RampPlan(points=tuple(pts), truncated=False, events=())

    events: list[str] = []
    truncated = False
    de = ramp_limit * period_s
    dw = speed_slew_rpm_s * period_s
    pts = [make_point(0.0, e0, w_start, soc)]
    e, t, w = e0, 0.0, w_start
    guard = 0
    while abs(e - e_target) > 1e-9:
        guard += 1
        if guard > 100000:
            raise RuntimeError("ramp failed to converge")
        t += period_s
        e = e - min(de, e - e_target) if e > e_target \
            else e + min(de, e_target - e)
        w = min(max(w_ref(e), w - dw), w + dw)
        # battery energy bookkeeping at the terminal (PV-free convention)
        if ess is not None and energy > 0:
            soc = soc - e * (period_s / 3600.0) / energy
            if soc <= floor + 1e-12:
                soc = floor
                pts.append(make_point(t, e, w, soc))
                events.append(f"soc-floor at t={t:.1f} s")
                truncated = True
                break
        pts.append(make_point(t, e, w, soc))
    return RampPlan(points=tuple(pts), truncated=truncated,
                    events=tuple(events))


# ---------------------------------------------------------------------------
# reserve audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReserveReport:
    gen_headroom_kw: float
    ess_headroom_kw: float
    total_kw: float
    required_kw: float
    satisfied: bool
    shortfall_kw: float


def reserve_check(
    fleet: Iterable[GenUnit],
    schedule: Schedule,
    headroom_req: float = DEFAULT_RESERVE_KW,
    ess: EssUnit | None = None,
) -> ReserveReport:
    """Audit spinning reserve: nameplate headroom of the online units above
    their dispatch, plus unused storage rating when a unit is fitted."""
    gen_headroom = sum(
        max(g.p_rated - schedule.gen_kw.get(g.id, 0.0), 0.0)
        for g in fleet if g.online)
    ess_headroom = 0.0
    if ess is not None:
        ess_headroom = max(ess.p_rating - max(schedule.ess_kw, 0.0), 0.0)
    total = gen_headroom + ess_headroom
    shortfall = max(headroom_req - total, 0.0)
    return ReserveReport(
        gen_headroom_kw=gen_headroom,
        ess_headroom_kw=ess_headroom,
        total_kw=total,
        required_kw=headroom_req,
        satisfied=shortfall == 0.0,
        shortfall_kw=shortfall,
    )
