"""
The battery-PV storage unit: modes, sign conventions, SOC
=========================================================

The 820 kW storage unit couples a 780 kWh battery and a rooftop PV array
behind one DC terminal.  Powers are signed from the ship's point of view:
positive supplies the bus, negative draws from it, and PV harvest is never
negative.  Mode selection is a pure function of state of charge, PV
availability, grid consent for fast charging, and an optional operator
request.
"""

from psvsim.storage import (
    BatteryPack,
    EssUnit,
    charge_mode_select,
    ess_dispatch_limits,
    irradiance_at,
    pv_power,
    sign_predicate_violations,
    soc_step,
)

ess = EssUnit()
pack = ess.battery
print(f"pack: {pack.energy_kwh:.0f} kWh at {pack.v_nom:.0f} V, "
      f"terminal rating {ess.p_rating:.0f} kW")

# -- mode selection across the SOC range -------------------------------------

print("\n  soc   pv kW  fast  -> mode         p_batt   p_ess")
for soc, pv, fast in ((0.10, 60.0, True), (0.10, 60.0, False),
                      (0.30, 60.0, False), (0.80, 60.0, False),
                      (1.00, 60.0, False)):
    sp = charge_mode_select(ess, soc, pv, fast)
    assert sign_predicate_violations(sp) == ()
    print(f"  {soc:.2f} {pv:6.0f} {str(fast):>5s}  -> {sp.mode:12s} "
          f"{sp.p_batt:7.1f} {sp.p_ess:7.1f}")

# -- the dispatch band the scheduler sees ------------------------------------

for soc in (0.25, 0.50, 0.90):
    lo, hi = ess_dispatch_limits(EssUnit(battery=BatteryPack(soc=soc)))
    print(f"soc {soc:.2f}: admissible terminal band [{lo:7.1f}, {hi:7.1f}] kW")

# -- integrating SOC through a discharge / fast-charge cycle ------------------

pack = BatteryPack(soc=0.60)
print(f"\nstart at soc {pack.soc:.3f}")
for _ in range(30):                      # 30 minutes discharging at 400 kW
    pack = soc_step(pack, 400.0, 60.0)
print(f"after 30 min at +400 kW: soc {pack.soc:.3f}")
sp = charge_mode_select(ess, pack.soc, pv_kw=50.0, grid_allows_fast=True,
                        request="fast-charge")
for _ in range(30):                      # 30 minutes fast-charging
    pack = soc_step(pack, sp.p_batt, 60.0)
print(f"after 30 min fast-charge ({sp.p_batt:.0f} kW at the battery, "
      f"charge efficiency {pack.eta_charge}): soc {pack.soc:.3f}")

# -- PV production follows irradiance ----------------------------------------

profile = [(0.0, 0.0), (6.0, 200.0), (12.0, 950.0), (18.0, 150.0)]
for hour in (6.0, 12.0):
    g = irradiance_at(profile, hour)
    print(f"hour {hour:4.1f}: irradiance {g:5.0f} W/m^2 -> "
          f"{pv_power(ess.pv, g):5.1f} kW from the array")
