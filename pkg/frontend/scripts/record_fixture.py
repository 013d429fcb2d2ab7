#!/usr/bin/env python3
"""Record a live gateway session to a JSONL fixture for the console tests.

Connects a test client to the psvsim operator gateway running the requested
scenario, then writes every message it receives -- hello, each telemetry
frame, and the final end marker -- as one JSON line each.  The recorder
insists on a gap-free frame sequence so the fixture is a faithful replay of
what a healthy browser session would have seen.

Usage: python3 scripts/record_fixture.py [scenario] [out.jsonl]
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

from starlette.testclient import TestClient

from psvsim import load_bundled
from psvsim.server import create_app


def record(scenario: str, out: Path, pace: float = 0.2) -> None:
    scn = load_bundled(scenario)
    lines: list[str] = []
    last_seq = -1
    with TestClient(create_app(scn, pace=pace)) as client:
        with client.websocket_connect("/ws") as ws:
            while True:
                msg = json.loads(ws.receive_text())
                lines.append(json.dumps(msg, separators=(",", ":")))
                if msg["type"] == "frame":
                    if last_seq >= 0 and msg["seq"] != last_seq + 1:
                        raise SystemExit(
                            f"dropped frames: seq {last_seq} -> {msg['seq']};"
                            " lower the pace and re-record")
                    last_seq = msg["seq"]
                if msg["type"] == "end":
                    break
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    n_frames = last_seq + 1
    print(f"{out}: {len(lines)} messages ({n_frames} frames), "
          f"{scn.sim.duration:.1f} s of {scenario}")


if __name__ == "__main__":
    scenario = sys.argv[1] if len(sys.argv) > 1 else "case8a"
    default = Path(__file__).resolve().parent.parent \
        / "test" / "fixtures" / f"{scenario}_session.jsonl"
    out = Path(sys.argv[2]) if len(sys.argv) > 2 else default
    record(scenario, out)
