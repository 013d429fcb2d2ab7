"""Diesel prime-mover dynamics, speed governor, fuel-consumption surface and
quasi-static DC-link converter model.

The engine model is a first-order fuel actuator with transport dead time
feeding a single rotating inertia with speed-squared rotational losses.  The
fuel-consumption surface is synthetic: a monotone-cubic spine ``s_min(P)``
through measured calibration anchors, inflated quadratically with relative
speed deviation from the optimized-speed schedule ``C(P)``.  Anchors and the
curvature constant live in a plain-text data file so they can be recalibrated
without touching code.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

# ---------------------------------------------------------------------------
# constants & small helpers
# ---------------------------------------------------------------------------

RATED_SPEED_RPM = 1800.0
STALL_RPM = 200.0

#: optimized-speed schedule C(P) [rpm], coefficients of ascending powers of P [kW]
SPEED_POLY_COEFFS = (720.93, 1.2591, -2.92e-3, 3.8104e-6, -2.1716e-9, 4.5206e-13)

_RPM_TO_RAD = math.pi / 30.0


def rpm_to_rad(rpm: float) -> float:
    return rpm * _RPM_TO_RAD


def rad_to_rpm(rad: float) -> float:
    return rad / _RPM_TO_RAD


class StallError(RuntimeError):
    """Engine speed fell below the stall threshold."""


# ---------------------------------------------------------------------------
# fuel-consumption surface
# ---------------------------------------------------------------------------


@dataclass
class SfocMap:
    """Synthetic specific-fuel-consumption surface s(P, omega).

    ``s(P, w) = s_min(P) * (1 + kappa * ((w - C(P)) / C(P))**2)``

    where ``C`` is the optimized-speed polynomial and ``s_min`` interpolates
    the calibration anchors with a monotone cubic, held flat outside the
    anchored power range.
    """

    anchors: tuple[tuple[float, float, float], ...]  # (P_kW, omega_rpm, sfoc)
    kappa: float
    coeffs: tuple[float, ...] = SPEED_POLY_COEFFS
    omega_min: float = 900.0
    omega_max: float = RATED_SPEED_RPM
    p_rated: float = 2048.0
    _smin: PchipInterpolator = field(init=False, repr=False)
    _p_lo: float = field(init=False, repr=False)
    _p_hi: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        pts = sorted(self.anchors)
        if len(pts) < 2:
            raise ValueError("need at least two calibration anchors")
        p = np.array([a[0] for a in pts])
        s = np.array([a[2] for a in pts])
        self._smin = PchipInterpolator(p, s, extrapolate=False)
        self._p_lo = float(p[0])
        self._p_hi = float(p[-1])

    # -- optimized-speed schedule ------------------------------------------

    def speed_raw(self, p_kw: float) -> float:
        """Unclamped polynomial value C(P) in rpm."""
        acc = 0.0
        for a in reversed(self.coeffs):
            acc = acc * p_kw + a
        return acc

    def optimized_speed(self, p_kw: float) -> float:
        """Fuel-optimal engine speed [rpm] for a unit loading of ``p_kw``."""
        if p_kw < 0:
            raise ValueError(f"power must be non-negative, got {p_kw}")
        w = self.speed_raw(p_kw)
        return min(max(w, self.omega_min), self.omega_max)

    # -- the surface ---------------------------------------------------------

    def s_min(self, p_kw: float) -> float:
        """Minimum-attainable SFOC [g/kWh] at power ``p_kw`` (flat beyond anchors)."""
        p = min(max(p_kw, self._p_lo), self._p_hi)
        return float(self._smin(p))

    def sfoc(self, p_kw: float, omega_rpm: float) -> float:
        """SFOC [g/kWh] at operating point (P, omega).

        Out-of-band speeds are clamped to the engine band before evaluation.
        Powers outside the anchored range use the flat extension of s_min.
        """
        if p_kw <= 0:
            raise ValueError(f"power must be positive, got {p_kw}")
        w = min(max(omega_rpm, self.omega_min), self.omega_max)
        w_opt = self.optimized_speed(p_kw)
        rel = (w - w_opt) / w_opt
        return self.s_min(p_kw) * (1.0 + self.kappa * rel * rel)

    def fuel_rate(self, p_kw: float, omega_rpm: float) -> float:
        """Fuel mass flow [kg/h] = SFOC * P."""
        if p_kw == 0:
            return 0.0
        return self.sfoc(p_kw, omega_rpm) * p_kw / 1000.0

    def in_band(self, p_kw: float, omega_rpm: float) -> bool:
        """True when the query point needs no clamping or flat extrapolation."""
        return (
            self._p_lo <= p_kw <= self._p_hi
            and self.omega_min <= omega_rpm <= self.omega_max
        )

    # -- vectorized evaluation (scheduler scans) ------------------------------

    def fuel_rate_many(self, p_kw: np.ndarray) -> np.ndarray:
        """Fuel mass flow [kg/h] at the optimized speed, elementwise.

        Equivalent to ``fuel_rate(p, optimized_speed(p))`` per element; the
        speed deviation term vanishes on the optimized-speed curve so this is
        ``s_min(P) * P / 1000`` with zero flow at zero power.
        """
        p = np.asarray(p_kw, dtype=float)
        if np.any(p < 0):
            raise ValueError("power must be non-negative")
        s = self._smin(np.clip(p, self._p_lo, self._p_hi))
        return np.where(p > 0, s * p / 1000.0, 0.0)


def load_sfoc_map(path: str | Path | None = None) -> SfocMap:
    """Parse a calibration-anchor table.

    Format: comment lines start with ``#``; the curvature constant appears in
    a comment as ``kappa = <value>``; data rows are whitespace-separated
    columns ``P_kW  omega_rpm  sfoc_g_per_kWh``.
    """
    if path is None:
        text = (resources.files("psvsim") / "data" / "sfoc_anchors.txt").read_text()
    else:
        text = Path(path).read_text()
    kappa = None
    anchors: list[tuple[float, float, float]] = []
    kappa_re = re.compile(r"^#\s*kappa\s*=\s*([0-9.eE+-]+)\s*$")
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = kappa_re.match(line)
            if m:
                kappa = float(m.group(1))
            continue
        cols = line.split()
        if len(cols) != 3:
            raise ValueError(f"anchor rows need 3 columns, got: {line!r}")
        anchors.append((float(cols[0]), float(cols[1]), float(cols[2])))
    if kappa is None:
        raise ValueError("anchor file does not declare kappa")
    if not anchors:
        raise ValueError("anchor file contains no data rows")
    return SfocMap(anchors=tuple(anchors), kappa=kappa)


_default_map: SfocMap | None = None


def default_sfoc_map() -> SfocMap:
    """The package-bundled calibration, loaded once."""
    global _default_map
    if _default_map is None:
        _default_map = load_sfoc_map()
    return _default_map


def optimized_speed(p_kw: float, sfoc_map: SfocMap | None = None) -> float:
    """Fuel-optimal speed [rpm] for one engine carrying ``p_kw``."""
    return (sfoc_map or default_sfoc_map()).optimized_speed(p_kw)


def sfoc_lookup(p_kw: float, omega_rpm: float, sfoc_map: SfocMap | None = None) -> float:
    """Specific fuel consumption [g/kWh] at (P, omega)."""
    return (sfoc_map or default_sfoc_map()).sfoc(p_kw, omega_rpm)


def fuel_rate(p_kw: float, omega_rpm: float, sfoc_map: SfocMap | None = None) -> float:
    """Fuel mass flow [kg/h] at (P, omega); zero power burns zero fuel."""
    return (sfoc_map or default_sfoc_map()).fuel_rate(p_kw, omega_rpm)


# ---------------------------------------------------------------------------
# diesel engine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DieselEngineParams:
    p_rated: float = 2048.0          # kW
    omega_rated: float = RATED_SPEED_RPM
    omega_min: float = 900.0         # rpm
    omega_max: float = RATED_SPEED_RPM
    k_pm: float = 1.0                # pu mech power per pu fuel command
    tau_pm: float = 0.05             # s, fuel actuator lag
    t_d: float = 0.015               # s, injection-to-torque dead time
    j_rot: float = 57.6              # kg m^2 (~1 s inertia constant at rated)
    k_loss: float = 1.1528           # W s^2/rad^2, rotational loss torque coeff
    stall_rpm: float = STALL_RPM

    def __post_init__(self) -> None:
        if min(self.p_rated, self.k_pm, self.j_rot, self.k_loss) <= 0:
            raise ValueError("engine parameters must be positive")
        if self.tau_pm < 0 or self.t_d < 0:
            raise ValueError("lag and dead time must be non-negative")
        if not self.omega_min < self.omega_max:
            raise ValueError("omega_min must be below omega_max")

    def loss_kw(self, omega_rpm: float) -> float:
        w = rpm_to_rad(omega_rpm)
        return self.k_loss * w * w / 1000.0


@dataclass(frozen=True)
class DieselEngineState:
    omega: float                     # rpm
    p_mech: float                    # kW at the shaft, after actuator lag
    u_f: float                       # last commanded fuel position, pu
    dead_time_buffer: tuple[tuple[float, float], ...]  # (timestamp, u_f) pairs
    t: float = 0.0                   # s


def make_engine_state(
    params: DieselEngineParams,
    omega_rpm: float,
    u_f: float,
    p_mech_kw: float,
    dt: float,
    t: float = 0.0,
) -> DieselEngineState:
    """Engine state with the dead-time buffer pre-filled at a constant command."""
    n_d = int(round(params.t_d / dt)) if params.t_d > 0 else 0
    buf = tuple((t - (n_d - k) * dt, u_f) for k in range(n_d))
    return DieselEngineState(omega=omega_rpm, p_mech=p_mech_kw, u_f=u_f,
                             dead_time_buffer=buf, t=t)


def engine_equilibrium(
    params: DieselEngineParams, p_load_kw: float, omega_rpm: float, dt: float,
    t: float = 0.0,
) -> DieselEngineState:
    """State at exact torque balance: mech power = load + rotational loss."""
    p_mech = p_load_kw + params.loss_kw(omega_rpm)
    u_f = p_mech / (params.k_pm * params.p_rated)
    return make_engine_state(params, omega_rpm, u_f, p_mech, dt, t)


def de_step(
    state: DieselEngineState,
    params: DieselEngineParams,
    u_f: float,
    p_load_kw: float,
    dt: float,
) -> DieselEngineState:
    """Advance the engine one step under fuel command ``u_f`` and electrical
    load ``p_load_kw``.

    Fuel path: ``u_f`` -> dead time (sample ring buffer) -> first-order lag ->
    shaft power.  Speed integrates the net torque
    ``(p_mech - p_load)/omega - k_loss*omega``.  The lag update uses the exact
    exponential step, so a held command settles with no discretization error;
    with ``tau_pm = 0`` the lag is a pass-through and the fuel path is a pure
    sample delay.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if params.tau_pm > 0 and dt > params.tau_pm / 5.0 + 1e-12:
        raise ValueError(f"dt={dt} too coarse for tau_pm={params.tau_pm} (need dt <= tau/5)")
    if state.omega <= 0:
        raise StallError(f"engine at {state.omega} rpm cannot produce torque")

    t_next = state.t + dt

    # dead time: consume the head sample, append the fresh command
    n_d = int(round(params.t_d / dt)) if params.t_d > 0 else 0
    buf = state.dead_time_buffer
    if len(buf) != n_d:  # dt changed mid-run; rebuild conservatively
        head = buf[0][1] if buf else u_f
        buf = tuple((state.t - (n_d - k) * dt, head) for k in range(n_d))
    if n_d > 0:
        u_delayed = buf[0][1]
        buf = buf[1:] + ((state.t, u_f),)
    else:
        u_delayed = u_f

    # actuator lag (exact exponential hold-step)
    p_target = params.k_pm * u_delayed * params.p_rated
    if params.tau_pm > 0:
        a = math.exp(-dt / params.tau_pm)
        p_mech = p_target + (state.p_mech - p_target) * a
    else:
        p_mech = p_target

    # rotor
    w = rpm_to_rad(state.omega)
    torque_net = (p_mech - p_load_kw) * 1000.0 / w - params.k_loss * w
    w_next = w + dt * torque_net / params.j_rot
    omega_next = rad_to_rpm(w_next)
    if omega_next < params.stall_rpm:
        raise StallError(
            f"engine stalled: {omega_next:.1f} rpm < {params.stall_rpm} rpm "
            f"(load {p_load_kw:.1f} kW)"
        )

    return DieselEngineState(omega=omega_next, p_mech=p_mech, u_f=u_f,
                             dead_time_buffer=buf, t=t_next)


# ---------------------------------------------------------------------------
# speed governor
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GovernorParams:
    k_p: float = 0.8                 # pu fuel per pu speed error
    k_i: float = 4.0                 # pu fuel per pu speed error per second
    u_min: float = 0.0
    u_max: float = 1.1
    omega_base: float = RATED_SPEED_RPM  # rpm, per-unit base for the error


@dataclass(frozen=True)
class GovernorState:
    integral: float = 0.0            # pu fuel contributed by the integrator


def governor_equilibrium(u_f: float) -> GovernorState:
    """Integrator preloaded for bumpless start at fuel position ``u_f``."""
    return GovernorState(integral=u_f)


def governor_step(
    state: GovernorState,
    params: GovernorParams,
    omega_ref_rpm: float,
    omega_rpm: float,
    dt: float,
) -> tuple[float, GovernorState]:
    """One PI update; returns (fuel command, next controller state).

    Anti-windup by conditional integration: the integrator freezes while the
    output is saturated and the error would push it further into the limit.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    e = (omega_ref_rpm - omega_rpm) / params.omega_base
    integral = state.integral + params.k_i * e * dt
    u_unsat = params.k_p * e + integral
    if (u_unsat > params.u_max and e > 0) or (u_unsat < params.u_min and e < 0):
        integral = state.integral    # hold
    u = min(max(params.k_p * e + integral, params.u_min), params.u_max)
    return u, GovernorState(integral=integral)


# ---------------------------------------------------------------------------
# DC-link converter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConverterPlant:
    c_dc: float = 0.1                # F
    v_dc: float = 1500.0             # V
    i_l: float = 0.0                 # A, line current drawn from the link
    v_min: float = 1425.0            # V, normal-operation band
    v_max: float = 1575.0            # V
    pole_pairs: int = 2
    lambda_ms: float = 1.0           # Wb, stator flux linkage (informational)
    i_ts: float = 0.0                # A, torque-producing stator current
    omega_r: float = 0.0             # electrical rad/s
    response_time: float = 0.01      # s, inner current-loop abstraction
    i_max: float = 2000.0            # A
    excursion: bool = False          # set when v_dc leaves the band

    def __post_init__(self) -> None:
        if self.c_dc <= 0 or self.v_dc <= 0:
            raise ValueError("capacitance and link voltage must be positive")


def dc_link_step(plant: ConverterPlant, p_in_kw: float, i_l: float, dt: float) -> ConverterPlant:
    """Integrate the DC-link capacitor energy balance one step.

    ``C * dv/dt * v = P_in - v * I_L`` -- power into the link charges the
    capacitor; at ``P_in = v * I_L`` the voltage holds exactly.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    dv = dt * (p_in_kw * 1000.0 - plant.v_dc * i_l) / (plant.c_dc * plant.v_dc)
    v_next = plant.v_dc + dv
    if v_next <= 0:
        raise ValueError("DC link collapsed (v_dc <= 0)")
    exc = not (plant.v_min <= v_next <= plant.v_max)
    return replace(plant, v_dc=v_next, i_l=i_l, excursion=exc)
