"""Acceptance gate: ten end-to-end checks, one printed verdict line each.

Every test measures its quantity through the public API, prints a single
``criterion NN PASS|FAIL ...`` line with the measured numbers, and asserts
the pinned tolerance (and the runtime budget where one applies).  Expected
values come from the reference contingency table, the calibration study
anchors, and independent brute-force oracles built inside this module —
never from the code under test.
"""

from __future__ import annotations

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from psvsim.dispatch import (
    GenUnit,
    InfeasibleProblemError,
    build_opf,
    enumerate_suboptimal,
    solve_opf,
    standard_fleet,
)
from psvsim.grid import Branch, Bus, build_network, standard_network
from psvsim.loads import MISSIONS, LoadUnit, standard_loads
from psvsim.powertrain import (
    DieselEngineParams,
    de_step,
    default_sfoc_map,
    engine_equilibrium,
    optimized_speed,
    rpm_to_rad,
    sfoc_lookup,
)
from psvsim.scenario import bundled_scenario_names, load_bundled, terminal_state
from psvsim.simcore import run_scenario
from psvsim.storage import (
    BatteryPack,
    EssUnit,
    charge_mode_select,
    irradiance_at,
    pv_power,
    sign_predicate_violations,
    soc_step,
)


def _verdict(num: int, label: str, ok: bool, detail: str) -> None:
    print(f"criterion {num:02d} {'PASS' if ok else 'FAIL'} {label}: {detail}")


# ---------------------------------------------------------------------------
# criterion 1: power-to-speed mapping
# ---------------------------------------------------------------------------

# every (power kW, speed rpm) pair of the reference contingency table; rows
# whose speed cells contradict their own power cell keep the row-consistent
# speed, and "n/a" speed cells are omitted
SPEED_PAIRS = (
    (899.37, 1108.0), (900.0, 1109.0),
    (948.8, 1130.0), (949.0, 1130.0), (950.0, 1130.0),
    (1224.86, 1243.0), (1225.0, 1243.0),
    (1324.88, 1280.0), (1325.0, 1280.0), (1325.88, 1280.0),
    (1652.5, 1400.0), (1701.0, 1425.0),
    (1875.14, 1570.0), (1875.17, 1570.0), (1875.2, 1570.0),
    (1879.62, 1575.0), (1934.60, 1650.0), (1975.0, 1716.0),
)


def test_optimized_speed_reproduces_reference_pairs():
    t0 = time.perf_counter()
    worst = max(abs(optimized_speed(p) - w) for p, w in SPEED_PAIRS)
    elapsed = time.perf_counter() - t0
    ok = worst <= 5.0 and elapsed < 1.0
    _verdict(1, "speed mapping", ok,
             f"worst |err| {worst:.2f} rpm over {len(SPEED_PAIRS)} pairs "
             f"(limit 5 rpm) in {elapsed:.3f} s (budget 1 s)")
    assert worst <= 5.0
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# criterion 2: fuel-surface calibration anchors
# ---------------------------------------------------------------------------

# (power kW, optimized speed pu, sfoc g/kWh) anchors of the suboptimal-point
# study
SFOC_ANCHORS = (
    (1875.0, 0.872, 207.0),
    (1975.0, 0.953, 204.0),
    (1330.0, 0.72, 205.0),
    (1230.0, 0.70, 200.0),
    (1225.0, 0.69, 197.0),
    (1125.0, 0.66, 195.0),
)

# constant-speed (1800 rpm) / optimized-speed pairs of the storage-influence
# study, asserted at the storage-free columns (the storage-assisted high-load
# state repeats the constant-speed figure of its storage-free twin, which no
# surface whose minimum tracks the optimized-speed curve can reproduce)
SFOC_PAIRS = (
    (1974.97, 203.0, 204.0),
    (1224.99, 222.0, 200.0),
    (1224.86, 222.0, 200.0),
)


def test_sfoc_surface_reproduces_calibration_anchors():
    t0 = time.perf_counter()
    errs = []
    for p, w_pu, s_exp in SFOC_ANCHORS:
        errs.append(abs(sfoc_lookup(p, w_pu * 1800.0) - s_exp))
    for p, s_cs, s_os in SFOC_PAIRS:
        errs.append(abs(sfoc_lookup(p, 1800.0) - s_cs))
        errs.append(abs(sfoc_lookup(p, optimized_speed(p)) - s_os))
    worst = max(errs)
    elapsed = time.perf_counter() - t0
    ok = worst <= 3.0 and elapsed < 1.0
    _verdict(2, "sfoc calibration", ok,
             f"worst |err| {worst:.2f} g/kWh over {len(errs)} checks "
             f"(limit 3) in {elapsed:.3f} s (budget 1 s)")
    assert worst <= 3.0
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# criterion 3: settled saving against the fixed-speed shadow
# ---------------------------------------------------------------------------


def test_low_dp_settled_sfoc_beats_fixed_speed_shadow():
    t0 = time.perf_counter()
    result = run_scenario(load_bundled("dp_low"))
    last = result.trace.of("schedule")[-1]
    settled, shadow = last["sfoc_opt"], last["sfoc_shadow"]
    saving = 100.0 * (shadow - settled) / shadow
    elapsed = time.perf_counter() - t0
    ok = 15.0 <= saving <= 23.0 and elapsed < 30.0
    _verdict(3, "19% saving claim", ok,
             f"settled {settled:.2f} vs 1800 rpm shadow {shadow:.2f} g/kWh "
             f"-> {saving:.2f}% (window 19 +- 4) in {elapsed:.1f} s "
             f"(budget 30 s)")
    assert 15.0 <= saving <= 23.0
    assert elapsed < 30.0


# ---------------------------------------------------------------------------
# criterion 4: contingency-table dispatch patterns
# ---------------------------------------------------------------------------

# per-unit generator powers (sorted descending) and storage terminal power for
# the pre-event and post-event rows of each blue-marked reference case
DISPATCH_ROWS = {
    "case1a": (([949.0] * 4, 4.0), ([1324.88] * 4, 0.49)),
    "case2a": (([1324.88] * 4, 4.0), ([899.37] * 4, 2.5)),
    "case3a": (([949.0] * 4, 4.0), ([1701.0, 1701.0, 0.0, 0.0], 398.0)),
    "case5a": (([1324.88] * 4, 0.49), ([1934.60, 1934.60, 0.0, 0.0], 1430.8)),
    "case7a": (([1224.86] * 4, 0.55), ([1875.17] * 4, 399.32)),
    "case8a": (([1875.17] * 4, 399.32), ([1224.86] * 4, 0.55)),
}

# red-marked rows: generation beyond nameplate, flagged rather than served
OVERLOAD_CASES = ("case3b", "case5b", "case10a")


def _solve_plant(scn):
    plant = terminal_state(scn)
    t_term = max((ev.at for ev in scn.events), default=0.0)
    pv = 0.0
    if plant.ess is not None:
        pv = pv_power(plant.ess.pv, irradiance_at(scn.irradiance, t_term))
    problem = build_opf(
        plant.network, plant.fleet, plant.ess, plant.loads, plant.mission,
        pv_kw=pv, reserve_kw=scn.reserve_kw,
        grid_allows_fast=scn.grid_allows_fast, sfoc_map=scn.sfoc_map)
    return solve_opf(problem)


def test_contingency_rows_reproduce_reference_dispatch():
    t0 = time.perf_counter()
    failures = []
    for name, rows in DISPATCH_ROWS.items():
        scn = load_bundled(name)
        for (gens_exp, ess_exp), sched in zip(
                rows,
                (_solve_plant(replace(scn, events=())), _solve_plant(scn))):
            got = sorted(sched.gen_kw.values(), reverse=True)
            exp = sorted(gens_exp, reverse=True)
            for g_got, g_exp in zip(got, exp):
                if g_exp == 0.0:
                    if abs(g_got) > 1.0:
                        failures.append(f"{name}: unit at {g_got:.1f} kW "
                                        "where the row stops it")
                elif abs(g_got - g_exp) > 0.05 * g_exp:
                    failures.append(f"{name}: unit {g_got:.2f} kW vs row "
                                    f"{g_exp:.2f} (+-5%)")
            total_exp = sum(gens_exp) + max(ess_exp, 0.0)
            total_got = sched.total_generation_kw
            if abs(total_got - total_exp) > 0.005 * total_exp:
                failures.append(f"{name}: total {total_got:.1f} kW vs row "
                                f"{total_exp:.1f} (+-0.5%)")
    flagged = []
    for name in OVERLOAD_CASES:
        try:
            mode = _solve_plant(load_bundled(name)).mode
        except InfeasibleProblemError:
            mode = "infeasible"
        flagged.append(mode)
        if mode not in ("overload-relaxed", "infeasible"):
            failures.append(f"{name}: mode {mode!r}, expected a flag")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60.0
    _verdict(4, "dispatch table patterns", ok,
             f"{len(DISPATCH_ROWS)} row-pairs matched, overload rows "
             f"{dict(zip(OVERLOAD_CASES, flagged))} in {elapsed:.1f} s "
             f"(budget 60 s)" + ("" if not failures else f"; {failures}"))
    assert not failures, failures
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# criterion 5: scheduler against an exhaustive grid oracle
# ---------------------------------------------------------------------------


def _oracle_best(prob, step=1.0):
    """Exhaustive ``step``-kW grid minimum over the symmetry-collapsed
    control set: identical engaged units of one island share a per-unit
    power axis, and one generator group per island is eliminated through
    that island's balance row."""
    ctrls = prob.controls
    pinned = {k: c.lo for k, c in enumerate(ctrls) if c.hi <= c.lo + 1e-12}
    groups: dict[tuple[int, str], list[int]] = {}
    for k, c in enumerate(ctrls):
        if k not in pinned:
            groups.setdefault((c.island, c.kind), []).append(k)
    island_rows = {}
    for r in range(prob.j_e.shape[0]):
        isl = next(ctrls[k].island for k in range(len(ctrls))
                   if prob.j_e[r, k] == 1.0)
        island_rows[isl] = r
    axes, elim = [], {}
    for (isl, kind), members in groups.items():
        if kind == "gen":
            elim[isl] = (isl, kind)
        else:
            c = ctrls[members[0]]
            axes.append(((isl, kind), c.lo, c.hi))
    grids = [np.arange(lo, hi + step / 2, step) for _, lo, hi in axes]
    mesh = np.meshgrid(*grids, indexing="ij", sparse=True)
    val = {key: m for (key, _, _), m in zip(axes, mesh)}
    shape = np.broadcast_shapes(*(np.shape(m) for m in mesh)) if mesh else ()
    mask = np.ones(shape, dtype=bool)
    for isl, key in elim.items():
        r = island_rows[isl]
        rhs = float(prob.o_e[r]) - sum(
            prob.j_e[r, k] * v for k, v in pinned.items())
        acc = 0.0
        for other, m in val.items():
            if other != key and ctrls[groups[other][0]].island == isl:
                acc = acc + len(groups[other]) * m
        per_unit = (rhs - acc) / len(groups[key])
        c = ctrls[groups[key][0]]
        mask = mask & (per_unit >= c.lo - 1e-9) & (per_unit <= c.hi + 1e-9)
        val[key] = per_unit
    full = dict(pinned)
    for key, members in groups.items():
        for k in members:
            full[k] = val[key]
    for r in range(prob.j_i.shape[0]):
        lhs = sum(prob.j_i[r, k] * v for k, v in full.items()
                  if prob.j_i[r, k] != 0.0)
        mask = mask & (lhs <= prob.o_i[r] + 1e-9)
    obj = 0.0
    for key, members in groups.items():
        if key[1] == "gen":
            obj = obj + len(members) * prob.sfoc_map.fuel_rate_many(
                np.maximum(val[key], 0.0))
        else:
            obj = obj + prob.f_p * np.maximum(val[key], 0.0) / 1000.0
    for k, v in pinned.items():
        if ctrls[k].kind == "gen" and v > 0:
            obj = obj + float(prob.sfoc_map.fuel_rate_many(np.array([v]))[0])
        elif ctrls[k].kind == "ess":
            obj = obj + prob.f_p * max(v, 0.0) / 1000.0
    return float(np.min(np.where(mask, obj, np.inf))), len(groups)


def _split_network(n_x: int, n_y: int):
    """Two electrically separate board sections, storage on the second."""
    buses = (
        Bus("XA", "generator", p_max=2048.0 * n_x),
        Bus("XL", "load", p_min=-6000.0),
        Bus("YA", "generator", p_max=2048.0 * n_y),
        Bus("YL", "load", p_min=-6000.0),
        Bus("YS", "ess", p_max=820.0, p_min=-820.0),
    )
    branches = (
        Branch("LX", "XA", "XL", r=0.5, rating=6000.0),
        Branch("LY", "YA", "YL", r=0.5, rating=6000.0),
        Branch("LS", "YL", "YS", r=0.5, rating=1100.0),
    )
    return build_network(buses, branches)


def test_scheduler_matches_exhaustive_grid_oracle():
    """20 randomized instances kept inside the spinning-reserve headroom so
    the declared bound/balance/board set is the whole story the scheduler
    must optimize over."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(20260819)
    std_net = standard_network()
    roster = standard_loads()
    worst = 0.0
    for i in range(20):
        if i % 3 == 2:
            n_x = int(rng.integers(1, 3))
            n_y = int(rng.integers(1, 3))
            net = _split_network(n_x, n_y)
            fleet = tuple(
                [GenUnit(id=f"GX{j+1}", bus="XA", p_rated=2048.0, online=True)
                 for j in range(n_x)]
                + [GenUnit(id=f"GY{j+1}", bus="YA", p_rated=2048.0,
                           online=True) for j in range(n_y)])
            ess = EssUnit(
                battery=BatteryPack(soc=float(rng.uniform(0.55, 0.95))),
                f_p=float(rng.uniform(180.0, 360.0)), bus="YS")
            lx = float(rng.uniform(0.3, 0.8)) * (n_x * 2048.0 - 810.0)
            ly = float(rng.uniform(0.3, 0.8)) * (n_y * 2048.0 - 810.0)
            loads = (
                LoadUnit("LDX", "XL", "cruise", 6000.0, current_setpoint=-lx),
                LoadUnit("LDY", "YL", "cruise", 6000.0, current_setpoint=-ly))
            pv = float(rng.uniform(0.0, 60.0))
        else:
            n_on = int(rng.integers(1, 5))
            net = std_net
            fleet = tuple(
                GenUnit(id=g.id, bus=g.bus, p_rated=g.p_rated,
                        online=(j < n_on))
                for j, g in enumerate(standard_fleet()))
            ess = (EssUnit(
                battery=BatteryPack(soc=float(rng.uniform(0.55, 0.95))),
                f_p=float(rng.uniform(180.0, 360.0)))
                if rng.random() < 0.7 else None)
            target = max(
                float(rng.uniform(0.3, 0.85)) * (n_on * 2048.0 - 810.0),
                420.0)
            weights = rng.uniform(0.1, 1.0, size=len(roster))
            gross = np.array([u.rated for u in roster]) * weights
            scale = target / gross.sum()
            loads = tuple(u.with_setpoint(-float(g * scale))
                          for u, g in zip(roster, gross))
            pv = float(rng.uniform(0.0, 60.0)) if ess is not None else 0.0
        prob = build_opf(net, fleet, ess, loads,
                         str(rng.choice(sorted(MISSIONS))),
                         pv_kw=pv, reserve_kw=690.0,
                         grid_allows_fast=bool(rng.random() < 0.5))
        sched = solve_opf(prob)
        assert sched.mode == "feasible", (i, sched.mode)
        best, n_free = _oracle_best(prob)
        assert n_free <= 3, (i, n_free)
        worst = max(worst, abs(sched.objective - best) / best)
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.01 and elapsed < 300.0
    _verdict(5, "scheduler vs grid oracle", ok,
             f"worst objective gap {worst:.4%} over 20 instances (limit 1%) "
             f"in {elapsed:.1f} s (budget 300 s)")
    assert worst <= 0.01
    assert elapsed < 300.0


# ---------------------------------------------------------------------------
# criterion 6: partitioning leaves the results alone
# ---------------------------------------------------------------------------


def test_partitioning_is_result_invariant():
    t0 = time.perf_counter()
    scn = load_bundled("case1a")
    r1 = run_scenario(scn, partitions=1)
    r3 = run_scenario(scn, partitions=3)
    worst = 0.0
    for a, b in zip(r1.trace.of("step"), r3.trace.of("step")):
        assert a["t"] == b["t"]
        for bus, v in a["v"].items():
            worst = max(worst, abs(v - b["v"][bus]))
    digests = {run_scenario(scn, partitions=3, workers=w).digest
               for w in (1, 2, 4)}
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and len(digests) == 1 and elapsed < 120.0
    _verdict(6, "partition invariance", ok,
             f"max bus-voltage gap {worst:.3e} pu (limit 1e-3), "
             f"{3 if len(digests) == 1 else len(digests)} worker counts -> "
             f"{len(digests)} digest(s) in {elapsed:.1f} s (budget 120 s)")
    assert worst <= 1e-3
    assert len(digests) == 1
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# criterion 7: nonlinear speed transient against the small-signal model
# ---------------------------------------------------------------------------


def test_speed_transient_matches_small_signal_response():
    """A held fuel command and a +5% load step at a small-signal operating
    point: the nonlinear rotor response must track the first-order response
    (gain 1/(2 k_loss w0), time constant J/(2 k_loss)) within 2% RMS of the
    analytic response over five time constants."""
    t0 = time.perf_counter()
    params = DieselEngineParams()
    dt = 0.01
    omega0 = 1800.0
    p_load = 33.0                    # +5% of this load deflects speed ~2%
    dp = 0.05 * p_load
    state = engine_equilibrium(params, p_load, omega0, dt)
    u_f = state.u_f
    tau = params.j_rot / (2.0 * params.k_loss)
    w0 = rpm_to_rad(omega0)
    gain = dp * 1000.0 / (2.0 * params.k_loss * w0)

    n = int(round(5.0 * tau / dt))
    err_sq = sig_sq = 0.0
    for _ in range(n):
        state = de_step(state, params, u_f, p_load + dp, dt)
        d_lin = -gain * (1.0 - math.exp(-state.t / tau))
        err_sq += (rpm_to_rad(state.omega) - (w0 + d_lin)) ** 2
        sig_sq += d_lin ** 2
    rms = math.sqrt(err_sq / sig_sq)
    elapsed = time.perf_counter() - t0
    ok = rms <= 0.02 and elapsed < 10.0
    _verdict(7, "small-signal speed transient", ok,
             f"RMS error {rms:.4%} of the analytic response over "
             f"5 tau = {5*tau:.0f} s (limit 2%) in {elapsed:.1f} s "
             f"(budget 10 s)")
    assert rms <= 0.02
    assert elapsed < 10.0


# ---------------------------------------------------------------------------
# criterion 8: storage sign conventions under a random walk
# ---------------------------------------------------------------------------


def test_storage_sign_conventions_random_walk():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    ess = EssUnit()
    pack = BatteryPack(soc=0.6)
    violations = 0
    for _ in range(10_000):
        pv = float(rng.uniform(0.0, 110.0))
        fast = bool(rng.integers(2))
        candidates = [None, None]
        if pack.soc >= pack.soc_min:
            candidates.append("discharge")
        if fast and pack.soc < pack.soc_max:
            candidates.append("fast-charge")
        if pack.soc < pack.soc_max:
            candidates.append("pv-charge")
        candidates.append("idle")
        req = candidates[int(rng.integers(len(candidates)))]
        sp = charge_mode_select(ess, pack.soc, pv, fast, request=req)
        violations += len(sign_predicate_violations(sp))
        if sp.mode == "discharge":
            p_batt = float(rng.uniform(0.0, ess.p_rating - sp.p_pv))
        else:
            p_batt = sp.p_batt
        pack = soc_step(pack, p_batt, float(rng.uniform(1.0, 60.0)))
        assert 0.0 <= pack.soc <= 1.0, pack.soc
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 30.0
    _verdict(8, "storage sign conventions", ok,
             f"{violations} predicate violations over 10000 steps, "
             f"soc stayed in [0, 1], in {elapsed:.1f} s (budget 30 s)")
    assert violations == 0
    assert elapsed < 30.0


# ---------------------------------------------------------------------------
# criterion 9: energy audit closes on every bundled scenario
# ---------------------------------------------------------------------------


def test_every_bundled_scenario_closes_energy_audit():
    t0 = time.perf_counter()
    worst_name, worst = "", 0.0
    for name in bundled_scenario_names():
        residual = run_scenario(load_bundled(name)).audit.residual_pct
        if abs(residual) > abs(worst):
            worst_name, worst = name, residual
    elapsed = time.perf_counter() - t0
    ok = abs(worst) <= 0.5
    _verdict(9, "energy audit", ok,
             f"worst residual {worst:+.4f}% ({worst_name}) over "
             f"{len(bundled_scenario_names())} scenarios (limit 0.5%) "
             f"in {elapsed:.1f} s")
    assert abs(worst) <= 0.5


# ---------------------------------------------------------------------------
# criterion 10: storage ramp trajectory and suboptimal-point recovery
# ---------------------------------------------------------------------------

# the service loads every study case rides on, plus the two cruise levels and
# the full hotel/miscellaneous shed of the loss-of-cruising-load story
_BASE_SERVICE = {
    "PULSE": -450.0, "RADAR": -450.0,
    "HH4": -200.0, "HH6": -200.0, "HH8": -240.0, "HH9": -400.0,
    "HH10": -400.0, "HH11": -240.0,
    "HL17": -80.0, "HL18": -80.0, "HL19": -80.0, "HL20": -80.0,
}
_CRUISE_HIGH = {"MP1": -2500.0, "MP2": -2500.0}
_CRUISE_LOW = {"MP1": -1000.0, "MP2": -1000.0}
_SHED_ALL_HOTEL = {k: 0.0 for k in
                   ("PULSE", "RADAR", "HH4", "HH6", "HH8", "HH9",
                    "HH10", "HH11")}

# (storage kW, per-unit sfoc g/kWh) of the six suboptimal study points,
# grouped by the problem view they belong to
SUBOPTIMAL_POINTS = {
    "pre": ((400.0, 207.0), (0.0, 204.0)),
    "shed": ((0.0, 205.0), (400.0, 200.0)),
    "post": ((0.55, 197.0), (400.0, 195.0)),
}


def _case_loads(*level_dicts):
    levels = dict(_BASE_SERVICE)
    for d in level_dicts:
        levels.update(d)
    return tuple(u.with_setpoint(levels.get(u.id, 0.0))
                 for u in standard_loads())


def test_storage_ramp_trajectory_and_suboptimal_recovery():
    t0 = time.perf_counter()
    # trajectory: the run must pass through the storage-assisted waypoint
    # before settling storage-free
    series = run_scenario(load_bundled("case8a")).sfoc_series()
    t_end, ess_end, sfoc_end = series[-1]
    settled = abs(ess_end) <= 25.0 and abs(sfoc_end - 197.0) <= 3.0
    waypoints = [t for t, e, s in series
                 if 350.0 <= e <= 450.0 and abs(s - 200.0) <= 3.0]
    passed_through = bool(waypoints) and waypoints[0] < t_end

    # enumeration: all six study points recovered from the three views
    net = standard_network()
    fleet = standard_fleet()
    ess = EssUnit(battery=BatteryPack(soc=0.85), f_p=340.0)
    views = {
        "pre": build_opf(net, fleet, ess, _case_loads(_CRUISE_HIGH),
                         "cruising"),
        "shed": build_opf(net, fleet, ess,
                          _case_loads(_CRUISE_HIGH, _SHED_ALL_HOTEL),
                          "cruising"),
        "post": build_opf(net, fleet, ess, _case_loads(_CRUISE_LOW),
                          "cruising"),
    }
    incumbent = solve_opf(views["pre"])
    missed = []
    for tag, prob in views.items():
        points = enumerate_suboptimal(prob, schedule=incumbent)
        for e_exp, s_exp in SUBOPTIMAL_POINTS[tag]:
            if not any(abs(p.p_ess - e_exp) <= 25.0
                       and abs(p.sfoc - s_exp) <= 3.0 for p in points):
                missed.append((tag, e_exp, s_exp))
    elapsed = time.perf_counter() - t0
    ok = settled and passed_through and not missed and elapsed < 120.0
    _verdict(10, "suboptimal treatment", ok,
             f"ramp waypoint (~400 kW, 200 +- 3) at t={waypoints[0] if waypoints else float('nan'):.2f} s, "
             f"settled ({ess_end:.2f} kW, {sfoc_end:.2f} g/kWh), "
             f"{6 - len(missed)}/6 study points recovered in {elapsed:.1f} s "
             f"(budget 120 s)" + ("" if not missed else f"; missed {missed}"))
    assert settled, (ess_end, sfoc_end)
    assert passed_through, "no storage-assisted waypoint before settling"
    assert not missed, missed
    assert elapsed < 120.0
