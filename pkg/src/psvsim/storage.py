"""Energy-storage models: PV array production, battery state-of-charge
bookkeeping, charge/discharge mode selection with signed-power conventions,
and the dispatch power band of the storage unit.

Sign convention: positive power supplies the ship (discharge); negative power
draws from the grid (charging).  The terminal identity ``p_ess = p_batt +
p_pv`` holds in every mode; currents are powers over the 650 V pack bus.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

PV_RATED_KW = 109.8          # 360 modules x 305 W
PACK_VOLTAGE = 650.0         # V
FAST_CHARGE_CURRENT = 600.0  # A, pack-level C/2 manufacturer limit
DISCHARGE_SOC_THRESHOLD = 0.45
CHARGE_EFFICIENCY = 0.95

MODES = ("discharge", "pv-charge", "fast-charge", "idle")


class ModeError(ValueError):
    """Raised for contradictory mode requests (e.g. discharge below the
    state-of-charge floor)."""


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PvArray:
    modules_total: int = 360
    n_series: int = 6
    n_parallel: int = 60
    p_module_stc: float = 305.0      # W
    v_mp: float = 54.7               # V
    i_mp: float = 5.58               # A
    area_per_module: float = 1.63    # m^2

    def __post_init__(self) -> None:
        if self.n_series * self.n_parallel != self.modules_total:
            raise ValueError("series x parallel must equal the module count")
        if min(self.p_module_stc, self.v_mp, self.i_mp, self.area_per_module) <= 0:
            raise ValueError("module parameters must be positive")

    @property
    def rated_kw(self) -> float:
        return self.p_module_stc * self.modules_total / 1e3

    @property
    def terminal_voltage(self) -> float:
        return self.n_series * self.v_mp

    @property
    def area_m2(self) -> float:
        return self.area_per_module * self.modules_total


@dataclass(frozen=True)
class BatteryPack:
    v_nom: float = PACK_VOLTAGE      # V
    capacity_ah: float = 1200.0
    modules_series: int = 14
    modules_parallel: int = 20
    soc: float = 1.0
    soc_min: float = 0.20
    soc_max: float = 1.00
    charge_rate_max: float = FAST_CHARGE_CURRENT  # A
    eta_charge: float = CHARGE_EFFICIENCY
    limit_flag: bool = False         # latched by soc_step on a clipped step

    def __post_init__(self) -> None:
        if not 0.0 <= self.soc <= 1.0:
            raise ValueError(f"soc {self.soc} outside [0, 1]")
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ValueError("need 0 <= soc_min < soc_max <= 1")
        if min(self.v_nom, self.capacity_ah, self.charge_rate_max) <= 0:
            raise ValueError("pack parameters must be positive")
        if not 0.0 < self.eta_charge <= 1.0:
            raise ValueError("charge efficiency must lie in (0, 1]")

    @property
    def energy_kwh(self) -> float:
        return self.v_nom * self.capacity_ah / 1e3


@dataclass(frozen=True)
class EssUnit:
    pv: PvArray = field(default_factory=PvArray)
    battery: BatteryPack = field(default_factory=BatteryPack)
    p_rating: float = 820.0          # kW, terminal rating (10% of DG fleet)
    bus: str = "B14"
    f_p: float | None = None         # storage energy price; None -> marginal DG cost
    discharge_soc_threshold: float = DISCHARGE_SOC_THRESHOLD
    mode: str = "idle"
    p_ess: float = 0.0               # kW, + supplies ship

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if abs(self.p_ess) > self.p_rating + 1e-6:
            raise ValueError("terminal power exceeds unit rating")


@dataclass(frozen=True)
class EssSetpoints:
    """Signed terminal powers [kW] and pack-bus currents [A] of one mode."""
    mode: str
    p_ess: float       # + supplies ship, - draws from grid
    p_batt: float      # + battery discharging
    p_pv: float        # >= 0 always
    i_dc: float
    i_batt: float
    i_pv: float


def _setpoints(mode: str, p_batt: float, p_pv: float) -> EssSetpoints:
    p_ess = p_batt + p_pv
    to_amps = 1e3 / PACK_VOLTAGE
    return EssSetpoints(
        mode=mode, p_ess=p_ess, p_batt=p_batt, p_pv=p_pv,
        i_dc=p_ess * to_amps, i_batt=p_batt * to_amps, i_pv=p_pv * to_amps,
    )


def ess_rating_for_fleet(total_dg_kw: float) -> float:
    """Storage terminal rating sized at 10% of the generation fleet."""
    if total_dg_kw < 0:
        raise ValueError("fleet capacity must be non-negative")
    return 0.1 * total_dg_kw


# ---------------------------------------------------------------------------
# PV production
# ---------------------------------------------------------------------------


def pv_power(pv: PvArray, irradiance: float) -> float:
    """Array output [kW] at ``irradiance`` W/m^2: linear in irradiance at the
    maximum-power point, clamped at the array rating."""
    if irradiance < 0:
        raise ValueError("irradiance must be non-negative")
    return min(pv.rated_kw * irradiance / 1000.0, pv.rated_kw)


def irradiance_at(points: Sequence[tuple[float, float]], t: float) -> float:
    """Linear interpolation over (t, W/m^2) breakpoints, flat beyond the ends."""
    if not points:
        return 0.0
    ts = np.array([p[0] for p in points], dtype=float)
    gs = np.array([p[1] for p in points], dtype=float)
    return float(np.interp(t, ts, gs))


# ---------------------------------------------------------------------------
# SOC dynamics
# ---------------------------------------------------------------------------


def soc_step(pack: BatteryPack, p_batt_kw: float, dt: float) -> BatteryPack:
    """Advance the state of charge by one step of ``p_batt_kw`` (signed,
    positive = discharging into the ship) over ``dt`` seconds.  Charging is
    penalized by the coulombic efficiency.  A step that would leave [0, 1]
    is clipped and latches the pack's limit flag."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    energy_kwh = p_batt_kw * dt / 3600.0
    if p_batt_kw >= 0:
        d_soc = -energy_kwh / pack.energy_kwh
    else:
        d_soc = -pack.eta_charge * energy_kwh / pack.energy_kwh
    raw = pack.soc + d_soc
    clipped = min(max(raw, 0.0), 1.0)
    return replace(pack, soc=clipped, limit_flag=abs(raw - clipped) > 1e-12)


# ---------------------------------------------------------------------------
# mode selection
# ---------------------------------------------------------------------------


def charge_mode_select(
    ess: EssUnit,
    soc: float,
    pv_kw: float,
    grid_allows_fast: bool,
    request: str | None = None,
) -> EssSetpoints:
    """Select the storage operating mode and its baseline terminal powers.

    Below the SOC floor the unit must charge: with grid consent it fast-charges
    at the manufacturer current limit (390 kW grid draw at 650 V) plus all PV;
    otherwise it takes the PV-only path.  Above the discharge threshold the
    unit is discharge-capable (the scheduler assigns the actual battery power);
    in the recovery band between, PV trickles into the pack.  A full pack
    passes PV straight to the ship.

    ``request`` may force "discharge", "fast-charge", "pv-charge" or "idle";
    a discharge request below the SOC floor is contradictory and raises
    :class:`ModeError`.
    """
    if not 0.0 <= soc <= 1.0:
        raise ValueError(f"soc {soc} outside [0, 1]")
    if pv_kw < 0:
        raise ValueError("pv power must be non-negative")
    if request is not None and request not in MODES:
        raise ValueError(f"unknown mode request {request!r}")

    floor = ess.battery.soc_min
    fast_draw_kw = ess.battery.charge_rate_max * ess.battery.v_nom / 1e3  # 390

    if request == "discharge":
        if soc < floor:
            raise ModeError(
                f"discharge requested at soc {soc:.3f}, below floor {floor:.2f}")
        return _setpoints("discharge", 0.0, pv_kw)
    if request == "fast-charge":
        if not grid_allows_fast:
            raise ModeError("fast-charge requested but grid consent withheld")
        if soc >= ess.battery.soc_max:
            raise ModeError("fast-charge requested on a full pack")
        return _setpoints("fast-charge", -(fast_draw_kw + pv_kw), pv_kw)
    if request == "pv-charge":
        if soc >= ess.battery.soc_max:
            raise ModeError("charge requested on a full pack")
        return _setpoints("pv-charge", -pv_kw, pv_kw)
    if request == "idle":
        return _setpoints("idle", 0.0, 0.0)

    # autonomous policy
    if soc < floor:
        if grid_allows_fast:
            return _setpoints("fast-charge", -(fast_draw_kw + pv_kw), pv_kw)
        return _setpoints("pv-charge", -pv_kw, pv_kw)
    if soc >= ess.battery.soc_max:
        # pack cannot absorb: PV feeds the ship directly
        return _setpoints("discharge", 0.0, pv_kw)
    if soc >= ess.discharge_soc_threshold:
        return _setpoints("discharge", 0.0, pv_kw)
    # recovery band: hold the unit off the grid, harvest PV into the pack
    if pv_kw > 0:
        return _setpoints("pv-charge", -pv_kw, pv_kw)
    return _setpoints("idle", 0.0, 0.0)


def sign_predicate_violations(sp: EssSetpoints) -> tuple[str, ...]:
    """Names of violated sign-convention predicates for the given setpoints.

    Discharge steps must satisfy the all-non-negative convention (PV, battery
    and terminal powers and currents flow toward the ship, currents additive);
    charging steps the mirrored convention (battery and terminal non-positive,
    PV still harvested non-negatively).  An empty tuple means the setpoints
    are sign-consistent.
    """
    tol = 1e-9
    bad: list[str] = []
    if sp.p_pv < -tol:
        bad.append("p_pv>=0")
    if sp.i_pv < -tol:
        bad.append("i_pv>=0")
    if abs(sp.p_ess - (sp.p_batt + sp.p_pv)) > tol:
        bad.append("p_ess==p_batt+p_pv")
    if abs(sp.i_dc - (sp.i_batt + sp.i_pv)) > 1e-6:
        bad.append("i_dc==i_batt+i_pv")
    if abs(sp.i_batt - sp.p_batt * 1e3 / PACK_VOLTAGE) > 1e-6:
        bad.append("i_batt==p_batt/v")
    if sp.mode == "discharge":
        if sp.p_batt < -tol:
            bad.append("p_batt>=0")
        if sp.p_ess < -tol:
            bad.append("p_ess>=0")
        if sp.i_dc < -1e-6:
            bad.append("i_dc>=0")
    elif sp.mode in ("pv-charge", "fast-charge"):
        if sp.p_batt > tol:
            bad.append("p_batt<=0")
        if sp.p_ess > tol:
            bad.append("p_ess<=0")
        if sp.i_dc > 1e-6:
            bad.append("i_dc<=0")
    return tuple(bad)


# ---------------------------------------------------------------------------
# dispatch band
# ---------------------------------------------------------------------------


def ess_dispatch_limits(ess: EssUnit, horizon_s: float = 900.0) -> tuple[float, float]:
    """Admissible terminal power band (p_min, p_max) [kW] for one scheduling
    horizon: discharge is bounded by the energy above the SOC floor spread
    over the horizon (and the terminal rating); charge acceptance by the
    headroom to full, the fast-charge hardware limit, and the rating."""
    if horizon_s <= 0:
        raise ValueError("horizon must be positive")
    pack = ess.battery
    horizon_h = horizon_s / 3600.0

    drainable_kwh = max(pack.soc - pack.soc_min, 0.0) * pack.energy_kwh
    p_max = min(ess.p_rating, drainable_kwh / horizon_h)

    headroom_kwh = max(pack.soc_max - pack.soc, 0.0) * pack.energy_kwh
    fast_draw_kw = pack.charge_rate_max * pack.v_nom / 1e3
    p_min = -min(ess.p_rating, fast_draw_kw,
                 headroom_kwh / (pack.eta_charge * horizon_h))
    return p_min, p_max
