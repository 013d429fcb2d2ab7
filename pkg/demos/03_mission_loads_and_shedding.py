"""
Mission load models and priority shedding
=========================================

The roster of consumers is fixed -- thrusters, main propulsion, two hotel
tiers, a pulsed group and a radar group -- but each marine mission ranks
them differently: dynamic positioning protects the thrusters, cruising
protects propulsion, naval warfare protects the pulsed loads.  A shed plan
covers a generation deficit from the lowest tier upward and never touches
the protected tier.
"""

from psvsim.loads import (
    MISSIONS,
    ThrusterParams,
    dp_load,
    dp_speed_for_power,
    mission_profile,
    pulse_train,
    shed_plan,
    standard_loads,
)

# -- thruster physics: cubic power law in shaft speed ------------------------

tp = ThrusterParams()
for omega in (0.8, 1.1, 1.3975):
    print(f"thruster at {omega:.3f} rev/s draws {dp_load(tp, omega):7.1f} kW")
print(f"speed for a 300 kW station-keeping draw: "
      f"{dp_speed_for_power(tp, 300.0):.3f} rev/s")

# pulsed consumers are scheduled at their window average but hit the grid
# with their instantaneous amplitude
hits = sum(1 for k in range(1000)
           if pulse_train(k * 0.01, amplitude_kw=450.0, duration=2.0,
                          period=10.0) > 0)
print(f"450 kW pulse, 2 s on / 10 s period: grid sees it {hits / 10:.0f}% "
      "of the time\n")

# -- mission priorities -------------------------------------------------------

print(f"missions: {', '.join(sorted(MISSIONS))}")
for mission in ("dynamic-positioning", "cruising"):
    prof = mission_profile(mission)
    protected = sorted(cls for cls, tier in prof.priorities.items()
                       if tier == max(prof.priorities.values()))
    print(f"  {mission}: protected classes {protected}")

# -- shedding a 1000 kW deficit under each ranking ---------------------------

loads = tuple(u.with_setpoint({
    "TT1": -300.0, "TT2": -300.0, "RT": -300.0,
    "PULSE": -450.0, "RADAR": -450.0,
    "HH4": -200.0, "HH6": -200.0, "HH8": -240.0, "HH9": -400.0,
    "HH10": -400.0, "HH11": -240.0,
    "HL17": -80.0, "HL18": -80.0, "HL19": -80.0, "HL20": -80.0,
}.get(u.id, 0.0)) for u in standard_loads())

for mission in ("dynamic-positioning", "naval-warfare"):
    plan = shed_plan(mission_profile(mission), 1000.0, loads)
    heads = ", ".join(f"{uid} {kw:.0f}" for uid, kw in plan.entries[:4])
    print(f"\n{mission}: shed {plan.total_shed:.0f} kW over "
          f"{len(plan.entries)} consumers ({heads}, ...)")
    if plan.advisory:
        print(f"  advisory: {plan.advisory}")
