"""
The vessel's DC distribution network: flow, losses, limits
==========================================================

The plant is a 20-bus / 21-branch dual-board DC ring at 1500 V: two
generator buses carry two 2048 kW sets each, a storage bus carries the
820 kW battery-PV unit, and the rest are thruster, propulsion and hotel
buses.  This script solves the resistive power flow for a typical
dynamic-positioning load pattern and reads the limit report.
"""

from psvsim.grid import (
    check_limits,
    dc_power_flow,
    islands,
    isolate_buses,
    standard_network,
)

net = standard_network()
print(f"buses: {len(net.buses)}, branches: {len(net.branches)}, "
      f"islands: {len(islands(net))}")

# a DP pattern: four sets at ~950 kW feed three 300 kW thrusters plus the
# 2900 kW hotel/service base (negative injections consume)
injections = {
    "B1": 1900.0, "B2": 1900.0,              # two sets per generator bus
    "B5": -300.0, "B12": -300.0, "B16": -300.0,   # tunnel/retractable thrusters
    "B4": -200.0, "B6": -200.0, "B8": -240.0, "B9": -400.0,
    "B10": -400.0, "B11": -240.0,            # hotel, high tier
    "B13": -450.0, "B15": -450.0,            # pulsed + radar groups
    "B17": -80.0, "B18": -80.0, "B19": -80.0, "B20": -80.0,  # hotel, low tier
}

flow = dc_power_flow(net, injections)
print(f"converged in {flow.iterations} Newton iterations, "
      f"network loss {flow.total_losses:.1f} kW")

v = flow.bus_voltages
lo, hi = min(v, key=v.get), max(v, key=v.get)
print(f"voltage band: {v[lo]:.4f} pu at {lo} .. {v[hi]:.4f} pu at {hi}")

# the slack bus absorbs the I2R imbalance on top of its scheduled output
for bus, p in sorted(flow.slack_injections.items()):
    print(f"slack {bus} actually supplies {p:.1f} kW")

# limit report: voltage bands and branch loading against derated ratings.
# ratings are report-only -- the scheduler never constrains branch flows
report = check_limits(net, flow)
print(f"limit report ok={report.ok}, {len(report.violations)} finding(s)")
for viol in report.violations:
    print(f"  {viol.constraint:18s} {viol.subject:6s} "
          f"past the limit by {viol.margin:.1f} ({viol.detail})")

# isolating a faulted bus switches out its branches; the bus becomes its
# own dead island and the ring keeps serving everything still connected
faulted = isolate_buses(net, ["B2"])
print(f"after isolating B2: {len(islands(faulted))} islands, "
      f"live branches {len(faulted.live_branches)}/{len(net.branches)}")
