"""
The live operator gateway: telemetry out, commands in
=====================================================

`psvsim serve <scenario>` hosts the running plant behind HTTP + WebSocket:
20 Hz telemetry frames stream out; sequenced operator commands (mission
change, load steps, fault injection, shed approval, pause/resume/snapshot)
come back in and land in the run trace with their apply timestamp.  The
browser console under frontend/ speaks exactly this protocol; here we
drive it in-process with a test client instead of a socket.
"""

import json
from dataclasses import replace

from fastapi.testclient import TestClient

from psvsim.scenario import load_bundled
from psvsim.server import create_app

scn = load_bundled("case1a")
scn = replace(scn, sim=replace(scn.sim, duration=60.0))

with TestClient(create_app(scn)) as client:
    # plain HTTP: liveness and a point-in-time state snapshot
    print("GET /healthz ->", client.get("/healthz").json())

    with client.websocket_connect("/ws") as ws:
        hello = ws.receive_json()
        print(f"\nhello: scenario {hello['scenario']!r}, "
              f"fleet {hello['fleet']}, frame rate {hello['frame_hz']} Hz")

        frame = ws.receive_json()
        while frame["type"] != "frame":
            frame = ws.receive_json()
        gens = {k: round(v["p"]) for k, v in frame["gen"].items()}
        print(f"frame seq={frame['seq']} t={frame['t']:.2f}s: gens {gens}, "
              f"soc {frame['ess']['soc']:.3f}, fleet sfoc "
              f"{frame['sfoc']:.1f} vs 1800 rpm shadow {frame['shadow']:.1f}")

        # a sequenced command: switch the mission ranking mid-run
        ws.send_text(json.dumps({
            "seq": 1, "kind": "set_mission",
            "payload": {"mission": "cruising"},
        }))
        reply = ws.receive_json()
        while reply["type"] == "frame":
            reply = ws.receive_json()
        print(f"\ncommand reply: {reply['type']} seq={reply['seq']} "
              f"command={reply['command']} applied_t={reply['applied_t']:.3f}")

        # a malformed command is refused with a reason, never a disconnect
        ws.send_text(json.dumps({"seq": 2, "kind": "launch-codes"}))
        reply = ws.receive_json()
        while reply["type"] == "frame":
            reply = ws.receive_json()
        print(f"bad command: {reply['type']} ({reply['reason']})")

    state = client.get("/state").json()
    print(f"\nplant kept running through it all: t={state['t']:.2f}s, "
          f"mission {state['mission']!r}, soc {state['soc']:.3f}")
