"""Consumer models: cruise propulsion, DP thrusters, hotel groups, pulsed and
radar loads, mission priority tables, per-mission load presets and shed-plan
construction.

Convention: shaft speeds are in rev/s and the rev-to-rad conversion of the
thruster power law is absorbed into the torque coefficient, so shaft power is
``speed * torque`` in this unit system.  Bus setpoints are negative
(consumption); shed quantities are positive kW.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping

import numpy as np

WATER_DENSITY = 997.0        # kg/m^3
TORQUE_COEFF = 0.56          # absorbed-2pi torque coefficient
THRUST_COEFF = 0.80          # bollard-pull style default; telemetry only
PROP_DIAMETER = 3.5          # m
HOTEL_PF = 0.8               # kVA -> kW for the AC hotel groups

HP, MP, LP = "HP", "MP", "LP"

LOAD_CLASSES = ("cruise", "dp-thruster", "hotel-high", "hotel-low", "pulsed", "radar")


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThrusterParams:
    c_t: float = THRUST_COEFF
    c_tau: float = TORQUE_COEFF
    rho: float = WATER_DENSITY
    d_p: float = PROP_DIAMETER
    omega_max: float = 1.56          # rev/s
    rated_power: float = 1100.0      # kW

    def __post_init__(self) -> None:
        if min(self.c_t, self.c_tau, self.rho, self.d_p,
               self.omega_max, self.rated_power) <= 0:
            raise ValueError("thruster parameters must be positive")


@dataclass(frozen=True)
class LoadUnit:
    id: str
    bus: str
    cls: str                         # one of LOAD_CLASSES
    rated: float                     # kW, or kVA for hotel groups
    power_factor: float | None = None
    current_setpoint: float = 0.0    # kW, <= 0

    def __post_init__(self) -> None:
        if self.cls not in LOAD_CLASSES:
            raise ValueError(f"unknown load class {self.cls!r}")
        if self.current_setpoint > 1e-9:
            raise ValueError(f"{self.id}: consumption setpoints are negative")
        if abs(self.current_setpoint) > self.rated_kw + 1e-6:
            raise ValueError(
                f"{self.id}: setpoint {self.current_setpoint} exceeds "
                f"{self.rated_kw:.1f} kW rating")

    @property
    def rated_kw(self) -> float:
        """Admissible active-power ceiling.  For AC groups the kVA figure is
        the converter throughput limit; the power factor splits P/Q for
        reactive telemetry and does not derate the active ceiling."""
        return self.rated

    @property
    def q_kvar(self) -> float:
        """Reactive power carried by the AC group at the present setpoint."""
        if self.power_factor is None or self.power_factor >= 1.0:
            return 0.0
        tan_phi = np.sqrt(1.0 - self.power_factor**2) / self.power_factor
        return abs(self.current_setpoint) * float(tan_phi)

    def with_setpoint(self, p_kw: float) -> "LoadUnit":
        return replace(self, current_setpoint=p_kw)


@dataclass(frozen=True)
class MissionProfile:
    mission: str
    priorities: Mapping[str, str]    # load class -> HP | MP | LP

    def __post_init__(self) -> None:
        missing = set(LOAD_CLASSES) - set(self.priorities)
        if missing:
            raise ValueError(f"priority map misses classes: {sorted(missing)}")
        bad = {v for v in self.priorities.values()} - {HP, MP, LP}
        if bad:
            raise ValueError(f"unknown priorities: {sorted(bad)}")


@dataclass(frozen=True)
class ShedPlan:
    entries: tuple[tuple[str, float], ...]   # (load id, shed kW), shed order
    total_shed: float
    insufficient: bool = False
    residual_kw: float = 0.0
    advisory: str = ""


# ---------------------------------------------------------------------------
# mission priority tables
# ---------------------------------------------------------------------------

# classic four-mission priority assignment: main propulsion is always
# protected; thrusters are vital only while station-keeping; pulsed/radar
# equipment is vital only in a warfare posture.
_PRIORITY_TABLE: dict[str, dict[str, str]] = {
    "cruising": {
        "cruise": HP, "dp-thruster": MP,
        "hotel-high": MP, "hotel-low": MP, "pulsed": LP, "radar": LP,
    },
    "dynamic-positioning": {
        "cruise": HP, "dp-thruster": HP,
        "hotel-high": MP, "hotel-low": MP, "pulsed": LP, "radar": LP,
    },
    "naval-warfare": {
        "cruise": HP, "dp-thruster": LP,
        "hotel-high": LP, "hotel-low": LP, "pulsed": HP, "radar": HP,
    },
    "at-port": {
        "cruise": HP, "dp-thruster": MP,
        "hotel-high": MP, "hotel-low": MP, "pulsed": MP, "radar": MP,
    },
}

MISSIONS = tuple(_PRIORITY_TABLE)


def mission_profile(mission: str) -> MissionProfile:
    try:
        table = _PRIORITY_TABLE[mission]
    except KeyError:
        raise ValueError(f"unknown mission {mission!r}") from None
    return MissionProfile(mission=mission, priorities=dict(table))


# ---------------------------------------------------------------------------
# the standard consumer roster
# ---------------------------------------------------------------------------


def standard_loads() -> tuple[LoadUnit, ...]:
    """Every consumer of the 20-bus vessel, all setpoints zeroed."""
    hotel_high = [("HH4", "B4", 640.0), ("HH6", "B6", 640.0),
                  ("HH8", "B8", 240.0), ("HH9", "B9", 400.0),
                  ("HH10", "B10", 400.0), ("HH11", "B11", 240.0)]
    hotel_low = [(f"HL{n}", f"B{n}", 80.0) for n in (17, 18, 19, 20)]
    units = [
        LoadUnit("MP1", "B3", "cruise", 3000.0),
        LoadUnit("MP2", "B7", "cruise", 3000.0),
        LoadUnit("TT1", "B5", "dp-thruster", 1100.0),
        LoadUnit("TT2", "B12", "dp-thruster", 1100.0),
        LoadUnit("RT", "B16", "dp-thruster", 1100.0),
        LoadUnit("PULSE", "B13", "pulsed", 450.0),
        LoadUnit("RADAR", "B15", "radar", 450.0),
    ]
    units += [LoadUnit(i, b, "hotel-high", r, power_factor=HOTEL_PF)
              for i, b, r in hotel_high]
    units += [LoadUnit(i, b, "hotel-low", r, power_factor=HOTEL_PF)
              for i, b, r in hotel_low]
    return tuple(units)


# ---------------------------------------------------------------------------
# load physics
# ---------------------------------------------------------------------------


def cruise_load(omega_frac: float, rated: float) -> float:
    """Cruise propulsion demand: cubic in vessel speed fraction."""
    if not 0.0 <= omega_frac <= 1.1:
        raise ValueError(f"speed fraction {omega_frac} outside [0, 1.1]")
    return rated * omega_frac**3


def thruster_forces(params: ThrusterParams, omega_p: float) -> tuple[float, float]:
    """(thrust N, torque N*m) of a thruster at ``omega_p`` rev/s."""
    if omega_p < 0:
        raise ValueError("thruster speed must be non-negative")
    d = params.d_p
    base = params.rho * omega_p * omega_p
    thrust = params.c_t * base * d**4
    torque = params.c_tau * base * d**5
    return thrust, torque


def dp_load(params: ThrusterParams, omega_p: float) -> float:
    """Electrical demand [kW] of a DP thruster at ``omega_p`` rev/s (cubic law,
    clamped at the thruster rating)."""
    if omega_p < 0:
        raise ValueError("thruster speed must be non-negative")
    p_kw = params.c_tau * params.rho * params.d_p**5 * omega_p**3 / 1e3
    return min(p_kw, params.rated_power)


def dp_saturated(params: ThrusterParams, omega_p: float) -> bool:
    """True when the cubic demand exceeds the rating and was clamped."""
    p_kw = params.c_tau * params.rho * params.d_p**5 * omega_p**3 / 1e3
    return p_kw > params.rated_power


def dp_speed_for_power(params: ThrusterParams, p_kw: float) -> float:
    """Invert the cubic law: shaft speed [rev/s] drawing ``p_kw``."""
    if p_kw < 0:
        raise ValueError("power must be non-negative")
    return float((p_kw * 1e3 / (params.c_tau * params.rho * params.d_p**5)) ** (1.0 / 3.0))


def pulsed_load(
    profile: float | Callable[[float], float],
    window: tuple[float, float],
    period: float,
) -> float:
    """Scheduling-average power [kW] of a pulse active over ``window`` within
    each ``period``: (1/T) * integral of the profile across the window."""
    t1, t2 = window
    if not (0.0 <= t1 < t2 <= period):
        raise ValueError(f"window {window} must sit inside (0, {period}]")
    if callable(profile):
        ts = np.linspace(t1, t2, 2001)
        vals = np.array([profile(float(t)) for t in ts])
        return float(np.trapezoid(vals, ts) / period)
    return profile * (t2 - t1) / period


def pulse_train(t: float, amplitude_kw: float, duration: float, period: float,
                phase: float = 0.0) -> float:
    """Instantaneous pulse-train power at time ``t`` (for transient runs)."""
    return amplitude_kw if (t - phase) % period < duration else 0.0


# ---------------------------------------------------------------------------
# mission presets
# ---------------------------------------------------------------------------

_HOTEL_HIGH_PRESET_KVA = 1000.0
_HOTEL_LOW_PRESET_KVA = 270.0


def mission_preset(mission: str, intensity: str = "low") -> dict[str, float]:
    """Per-load setpoints [kW, negative] for a mission at low/high intensity.

    Propulsion levels: DP thrusters -300 each (low) / -800 (high); cruise main
    propulsion -1000 each (low) / -2500 (high).  Hotel groups share a
    1000 kVA (high tier) / 270 kVA (low tier) demand pro rata their ratings at
    pf 0.8; the pulsed and radar consumers run at rating when the mission
    calls for them.
    """
    if intensity not in ("low", "high"):
        raise ValueError(f"intensity must be low or high, got {intensity!r}")
    mission_profile(mission)  # validate mission name
    roster = standard_loads()
    out: dict[str, float] = {u.id: 0.0 for u in roster}

    hh_units = [u for u in roster if u.cls == "hotel-high"]
    hl_units = [u for u in roster if u.cls == "hotel-low"]
    hh_total = sum(u.rated for u in hh_units)
    hl_total = sum(u.rated for u in hl_units)
    for u in hh_units:
        out[u.id] = -_HOTEL_HIGH_PRESET_KVA * (u.rated / hh_total) * HOTEL_PF
    for u in hl_units:
        out[u.id] = -_HOTEL_LOW_PRESET_KVA * (u.rated / hl_total) * HOTEL_PF

    if mission == "dynamic-positioning":
        level = -300.0 if intensity == "low" else -800.0
        for uid in ("TT1", "TT2", "RT"):
            out[uid] = level
        out["PULSE"], out["RADAR"] = -450.0, -450.0
    elif mission == "cruising":
        level = -1000.0 if intensity == "low" else -2500.0
        out["MP1"] = out["MP2"] = level
        out["PULSE"], out["RADAR"] = -450.0, -450.0
    elif mission == "naval-warfare":
        level = -1000.0 if intensity == "low" else -2500.0
        out["MP1"] = out["MP2"] = level
        out["PULSE"], out["RADAR"] = -450.0, -450.0
    else:  # at-port: hotel loads only
        pass
    return out


# ---------------------------------------------------------------------------
# shed planning
# ---------------------------------------------------------------------------


def shed_plan(
    profile: MissionProfile,
    deficit_kw: float,
    loads: Iterable[LoadUnit],
) -> ShedPlan:
    """Build a shed list covering ``deficit_kw``: low-priority loads first,
    then medium; high-priority loads are never shed.  Within a tier, the
    largest current demand sheds first (fewest consumers interrupted).
    An insufficient plan carries the residual and an operator advisory.
    """
    if deficit_kw < 0:
        raise ValueError("deficit must be non-negative")
    loads = list(loads)
    if deficit_kw == 0:
        return ShedPlan(entries=(), total_shed=0.0)

    remaining = deficit_kw
    entries: list[tuple[str, float]] = []
    for tier in (LP, MP):
        candidates = [u for u in loads
                      if profile.priorities[u.cls] == tier
                      and -u.current_setpoint > 1e-9]
        candidates.sort(key=lambda u: (u.current_setpoint, u.id))  # largest demand first
        for u in candidates:
            if remaining <= 1e-9:
                break
            demand = -u.current_setpoint
            cut = min(demand, remaining)
            entries.append((u.id, cut))
            remaining -= cut
        if remaining <= 1e-9:
            break

    insufficient = remaining > 1e-9
    advisory = ""
    if insufficient:
        hp_demand = sum(-u.current_setpoint for u in loads
                        if profile.priorities[u.cls] == HP)
        advisory = (
            f"shedding exhausted with {remaining:.1f} kW still unserved; "
            f"{hp_demand:.0f} kW of priority-protected demand remains -- "
            "reduce vessel speed to cut propulsion load")
    return ShedPlan(
        entries=tuple(entries),
        total_shed=deficit_kw - max(remaining, 0.0),
        insufficient=insufficient,
        residual_kw=max(remaining, 0.0),
        advisory=advisory,
    )
