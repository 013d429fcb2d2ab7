"""Storage checks: PV scaling, SOC arithmetic with charge efficiency, mode
selection with the signed-power conventions, and dispatch power bands."""

from __future__ import annotations

import numpy as np
import pytest

from psvsim.storage import (
    BatteryPack,
    EssUnit,
    ModeError,
    PvArray,
    charge_mode_select,
    ess_dispatch_limits,
    ess_rating_for_fleet,
    irradiance_at,
    pv_power,
    sign_predicate_violations,
    soc_step,
)


# ---------------------------------------------------------------------------
# PV array
# ---------------------------------------------------------------------------


def test_pv_array_construction():
    pv = PvArray()
    assert pv.rated_kw == pytest.approx(109.8)        # 360 x 305 W
    assert pv.terminal_voltage == pytest.approx(328.2)  # 6 x 54.7 V
    assert pv.area_m2 == pytest.approx(586.8)
    with pytest.raises(ValueError):
        PvArray(modules_total=360, n_series=5, n_parallel=60)


def test_pv_power_scaling():
    pv = PvArray()
    assert pv_power(pv, 1000.0) == pytest.approx(109.8)
    assert pv_power(pv, 0.0) == 0.0
    assert pv_power(pv, 500.0) == pytest.approx(54.9)
    assert pv_power(pv, 1500.0) == pytest.approx(109.8)  # clamped at rating
    with pytest.raises(ValueError):
        pv_power(pv, -1.0)


def test_pv_power_monotone():
    pv = PvArray()
    rng = np.random.default_rng(11)
    gs = np.sort(rng.uniform(0, 1400, size=60))
    powers = [pv_power(pv, float(g)) for g in gs]
    assert all(b >= a - 1e-12 for a, b in zip(powers, powers[1:]))


def test_irradiance_interpolation():
    points = [(0.0, 0.0), (10.0, 1000.0), (20.0, 400.0)]
    assert irradiance_at(points, 5.0) == pytest.approx(500.0)
    assert irradiance_at(points, 15.0) == pytest.approx(700.0)
    assert irradiance_at(points, -5.0) == 0.0      # flat before first point
    assert irradiance_at(points, 100.0) == 400.0   # flat after last point
    assert irradiance_at([], 5.0) == 0.0


# ---------------------------------------------------------------------------
# SOC arithmetic
# ---------------------------------------------------------------------------


def test_soc_step_zero_power():
    pack = BatteryPack(soc=0.7)
    assert soc_step(pack, 0.0, 60.0).soc == pytest.approx(0.7)


def test_soc_step_discharge_half():
    # 390 kW for one hour drains half of the 780 kWh pack
    pack = soc_step(BatteryPack(soc=1.0), 390.0, 3600.0)
    assert pack.soc == pytest.approx(0.50, abs=1e-12)
    assert not pack.limit_flag


def test_soc_step_charge_efficiency():
    # 100 kW charging for one hour banks 95 kWh at efficiency 0.95
    pack = soc_step(BatteryPack(soc=0.5), -100.0, 3600.0)
    assert pack.soc == pytest.approx(0.5 + 95.0 / 780.0, abs=1e-12)


def test_soc_step_clips_and_flags():
    low = soc_step(BatteryPack(soc=0.05), 390.0, 3600.0)
    assert low.soc == 0.0
    assert low.limit_flag
    high = soc_step(BatteryPack(soc=0.99), -200.0, 3600.0)
    assert high.soc == 1.0
    assert high.limit_flag
    with pytest.raises(ValueError):
        soc_step(BatteryPack(), 100.0, 0.0)


def test_soc_bookkeeping_against_integral():
    # independent energy integral over a random signed-power sequence
    rng = np.random.default_rng(99)
    pack = BatteryPack(soc=0.6)
    stored_kwh = pack.soc * pack.energy_kwh
    for _ in range(500):
        p = float(rng.uniform(-400, 400))
        dt = float(rng.uniform(1, 30))
        nxt = soc_step(pack, p, dt)
        if not nxt.limit_flag:
            e = p * dt / 3600.0
            stored_kwh -= e if p >= 0 else pack.eta_charge * e
        else:
            stored_kwh = nxt.soc * pack.energy_kwh
        pack = nxt
        assert 0.0 <= pack.soc <= 1.0
    assert pack.soc * pack.energy_kwh == pytest.approx(stored_kwh, abs=1e-6)


# ---------------------------------------------------------------------------
# mode selection
# ---------------------------------------------------------------------------


def test_full_pack_discharges():
    sp = charge_mode_select(EssUnit(), 1.0, 50.0, grid_allows_fast=True)
    assert sp.mode == "discharge"
    assert sp.p_pv == 50.0
    assert sp.p_batt == 0.0
    assert sp.p_ess == pytest.approx(50.0)
    assert sign_predicate_violations(sp) == ()


def test_fast_charge_setpoints():
    # below the floor with grid consent: 600 A x 650 V = 390 kW grid draw,
    # battery absorbs the grid draw plus all PV
    sp = charge_mode_select(EssUnit(), 0.15, 50.0, grid_allows_fast=True)
    assert sp.mode == "fast-charge"
    assert sp.p_ess == pytest.approx(-390.0)
    assert sp.p_batt == pytest.approx(-440.0)
    assert sp.p_pv == 50.0
    assert sp.i_dc == pytest.approx(-600.0)
    assert sp.p_batt == pytest.approx(sp.p_ess - sp.p_pv)  # charge-side identity
    assert sign_predicate_violations(sp) == ()


def test_pv_only_charge_when_fast_denied():
    sp = charge_mode_select(EssUnit(), 0.15, 50.0, grid_allows_fast=False)
    assert sp.mode == "pv-charge"
    assert sp.p_batt == pytest.approx(-50.0)
    assert sp.p_ess == pytest.approx(0.0)
    assert sign_predicate_violations(sp) == ()


def test_discharge_request_below_floor_is_contradictory():
    with pytest.raises(ModeError):
        charge_mode_select(EssUnit(), 0.15, 0.0, grid_allows_fast=True,
                           request="discharge")


def test_forced_mode_requests():
    ess = EssUnit()
    sp = charge_mode_select(ess, 0.6, 20.0, grid_allows_fast=True,
                            request="fast-charge")
    assert sp.mode == "fast-charge"
    assert sp.p_ess == pytest.approx(-390.0)   # grid draw pinned at 600 A
    assert sp.p_batt == pytest.approx(-410.0)  # battery absorbs grid + PV
    with pytest.raises(ModeError):
        charge_mode_select(ess, 0.6, 0.0, grid_allows_fast=False,
                           request="fast-charge")
    with pytest.raises(ModeError):
        charge_mode_select(ess, 1.0, 0.0, grid_allows_fast=True,
                           request="fast-charge")
    idle = charge_mode_select(ess, 0.6, 30.0, grid_allows_fast=True,
                              request="idle")
    assert idle.p_ess == idle.p_batt == idle.p_pv == 0.0


def test_recovery_band_policy():
    ess = EssUnit()
    # between the floor and the discharge threshold: harvest PV, stay off grid
    sp = charge_mode_select(ess, 0.30, 20.0, grid_allows_fast=True)
    assert sp.mode == "pv-charge"
    assert sp.p_batt == pytest.approx(-20.0)
    assert charge_mode_select(ess, 0.30, 0.0, True).mode == "idle"
    # at the threshold the unit becomes discharge-capable
    assert charge_mode_select(ess, 0.45, 0.0, True).mode == "discharge"
    assert charge_mode_select(ess, 0.44, 0.0, True).mode == "idle"


def test_sign_conventions_random_suite():
    # every selected mode satisfies its full signed-power predicate set
    ess = EssUnit()
    rng = np.random.default_rng(314)
    requests = (None, None, None, "discharge", "fast-charge", "pv-charge", "idle")
    checked = 0
    for _ in range(2000):
        soc = float(rng.uniform(0, 1))
        pv_kw = float(rng.uniform(0, 110))
        fast_ok = bool(rng.integers(2))
        req = requests[int(rng.integers(len(requests)))]
        try:
            sp = charge_mode_select(ess, soc, pv_kw, fast_ok, request=req)
        except ModeError:
            continue
        assert sign_predicate_violations(sp) == (), (soc, pv_kw, fast_ok, req)
        checked += 1
    assert checked > 1500


# ---------------------------------------------------------------------------
# dispatch band
# ---------------------------------------------------------------------------


def test_limits_at_soc_floor():
    ess = EssUnit(battery=BatteryPack(soc=0.20))
    p_min, p_max = ess_dispatch_limits(ess)
    assert p_max == 0.0
    assert p_min < 0.0  # charging still welcome at the floor


def test_limits_full_pack():
    ess = EssUnit(battery=BatteryPack(soc=1.0))
    p_min, p_max = ess_dispatch_limits(ess, horizon_s=900.0)
    assert p_max == pytest.approx(820.0)  # rating binds, not energy
    assert p_min == 0.0                   # no headroom to charge


def test_limits_energy_bound():
    # soc 0.25 over a 15-minute horizon: 0.05 x 780 kWh / 0.25 h = 156 kW
    ess = EssUnit(battery=BatteryPack(soc=0.25))
    _, p_max = ess_dispatch_limits(ess, horizon_s=900.0)
    assert p_max == pytest.approx(156.0)


def test_limits_charge_side():
    # mid-band: the 600 A fast-charge hardware limit binds at -390 kW
    ess = EssUnit(battery=BatteryPack(soc=0.5))
    p_min, _ = ess_dispatch_limits(ess, horizon_s=900.0)
    assert p_min == pytest.approx(-390.0)
    # nearly full: headroom over the horizon binds instead
    ess_high = EssUnit(battery=BatteryPack(soc=0.99))
    p_min_high, _ = ess_dispatch_limits(ess_high, horizon_s=900.0)
    assert p_min_high == pytest.approx(-7.8 / (0.95 * 0.25), rel=1e-9)


def test_limits_band_ordering_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        ess = EssUnit(battery=BatteryPack(soc=float(rng.uniform(0, 1))))
        horizon = float(rng.uniform(60, 3600))
        p_min, p_max = ess_dispatch_limits(ess, horizon)
        assert p_min <= 0.0 <= p_max
        assert p_max <= ess.p_rating + 1e-9
        assert -p_min <= ess.p_rating + 1e-9


# ---------------------------------------------------------------------------
# fleet sizing
# ---------------------------------------------------------------------------


def test_ess_rating_for_fleet():
    assert ess_rating_for_fleet(8192.0) == pytest.approx(819.2)
    assert ess_rating_for_fleet(0.0) == 0.0
    # 10% rule tracks fleet edits exactly
    rng = np.random.default_rng(1)
    for total in rng.uniform(1000, 20000, size=20):
        assert ess_rating_for_fleet(float(total)) == pytest.approx(0.1 * total)
    with pytest.raises(ValueError):
        ess_rating_for_fleet(-1.0)
