"""
Fuel-optimal dispatch and the suboptimal-point family
=====================================================

Every half second the scheduler solves a DC optimal power flow: pick each
set's power (and speed, via the optimized-speed locus) plus the storage
terminal power so that total fuel burn is minimal, subject to the island
energy balances, converter board limits, unit ratings and spinning
reserve.  When the optimum is out of reach it degrades explicitly --
overload relaxation first, then mission-ranked shedding -- and flags the
schedule accordingly.

Alongside the global optimum the scheduler can enumerate the named
suboptimal candidates (storage-free, incumbent-assist, fast-charge, and
interior local minima of the storage scan) that an operator might prefer
for reserve or battery-health reasons.
"""

from psvsim.dispatch import (
    build_opf,
    enumerate_suboptimal,
    reserve_check,
    solve_opf,
    standard_fleet,
)
from psvsim.grid import standard_network
from psvsim.loads import standard_loads
from psvsim.storage import BatteryPack, EssUnit

net = standard_network()
fleet = standard_fleet()
ess = EssUnit(battery=BatteryPack(soc=0.85), f_p=340.0)

LEVELS = {
    "PULSE": -450.0, "RADAR": -450.0,
    "HH4": -200.0, "HH6": -200.0, "HH8": -240.0, "HH9": -400.0,
    "HH10": -400.0, "HH11": -240.0,
    "HL17": -80.0, "HL18": -80.0, "HL19": -80.0, "HL20": -80.0,
}


def loads_at(**thrust):
    levels = dict(LEVELS)
    levels.update(thrust)
    return tuple(u.with_setpoint(levels.get(u.id, 0.0))
                 for u in standard_loads())


# -- low-cruise dispatch (4900 kW): storage idles, sets ride the locus -------

low = build_opf(net, fleet, ess, loads_at(MP1=-1000.0, MP2=-1000.0),
                "cruising")
sched = solve_opf(low)
print(f"low cruise: mode {sched.mode}, burn {sched.objective:.1f} kg/h")
for gid in sorted(sched.gen_kw):
    print(f"  {gid}: {sched.gen_kw[gid]:7.1f} kW @ "
          f"{sched.omega_ref[gid]:4.0f} rpm")
print(f"  storage: {sched.ess_kw:+.1f} kW ({sched.ess_mode})")

rr = reserve_check(fleet, sched, ess=ess)
print(f"  spinning reserve: {rr.total_kw:.0f} kW headroom "
      f"(required {rr.required_kw:.0f}, satisfied={rr.satisfied})")

# -- high-cruise dispatch (7900 kW): reserve pulls the battery in -------------

high = build_opf(net, fleet, ess, loads_at(MP1=-2500.0, MP2=-2500.0),
                 "cruising")
sched_high = solve_opf(high)
print(f"\nhigh cruise: mode {sched_high.mode}, "
      f"per-unit {max(sched_high.gen_kw.values()):.1f} kW, "
      f"storage {sched_high.ess_kw:+.1f} kW")

# -- the suboptimal family on the loss-of-load story --------------------------
# the vessel drops from high to low cruise; candidates show what holding the
# old storage assist, or refusing storage entirely, would cost

points = enumerate_suboptimal(low, schedule=sched_high)
print("\nlabel            storage kW   set kW   speed pu   sfoc    kg/h")
for p in sorted(points, key=lambda q: q.objective):
    print(f"{p.label:16s} {p.p_ess:9.1f} {p.p_gen[0]:9.1f} "
          f"{p.omega_pu:9.3f} {p.sfoc:7.1f} {p.objective:7.1f}  "
          f"[{p.classification}]")
