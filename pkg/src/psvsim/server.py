"""Live telemetry/command gateway.

One simulated plant per process, stepped by a background task on the event
loop; any number of observers subscribe over a WebSocket upgraded on the same
port that serves the static console assets.  Telemetry is decimated to the
frame rate and fanned out through bounded per-client buffers that drop the
oldest frame first; command messages are never dropped -- each one is
validated, applied at a step boundary, and acknowledged with the applying
step's timestamp (or negatively acknowledged with a reason).
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
import time
from collections import deque
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Any, AsyncIterator

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .loads import MISSIONS
from .scenario import ContingencyEvent, Scenario
from .simcore import InjectError, SimEngine

TELEMETRY_SCHEMA = 1
FRAME_HZ = 20.0                  # UI cadence; the trace file keeps full rate
FRAME_BUFFER = 64                # per-subscriber bound, drop-oldest
ADVISORY_KEEP = 8
COMMAND_KINDS = ("set_mission", "inject_event", "approve_shed", "set_load",
                 "pause", "resume", "snapshot")

log = logging.getLogger("psvsim.server")

_PLACEHOLDER = """<!doctype html>
<meta charset="utf-8"><title>psvsim gateway</title>
<body style="font-family: system-ui; margin: 3rem; max-width: 40rem">
<h1>psvsim gateway</h1>
<p>The operator console bundle is not installed.  The live WebSocket stream
is available at <code>/ws</code> and a state snapshot at
<code>/state</code>.</p>
"""


class GatewaySession:
    """Owns the engine, the step task, and the subscriber fan-out."""

    def __init__(self, scenario: Scenario, *, partitions: int | None = None,
                 workers: int = 1, pace: float | None = None):
        self.scenario = scenario
        self.engine = SimEngine(scenario, partitions=partitions,
                                workers=workers)
        self.pace = scenario.sim.pace if pace is None else pace
        self.dt = self.engine.dt
        self.frame_every = max(1, round(1.0 / (FRAME_HZ * self.dt)))
        self.n_steps = round(scenario.sim.duration / self.dt)
        self.paused = False
        self.finished = False
        self._subscribers: dict[int, asyncio.Queue[str]] = {}
        self._next_sub = 0
        self._frame_seq = 0
        self._advisories: deque[str] = deque(maxlen=ADVISORY_KEEP)
        self._events_cursor = 0
        self._task: asyncio.Task[None] | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> None:
        self._task = asyncio.get_running_loop().create_task(self._step_loop())

    async def stop(self) -> None:
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass
        self.engine.close()

    async def _step_loop(self) -> None:
        wall0 = time.monotonic()
        while self.engine.state.step < self.n_steps:
            if self.paused:
                await asyncio.sleep(0.02)
                wall0 = time.monotonic() - self.engine.state.step * self.dt \
                    * self.pace
                continue
            self.engine.step()
            self._collect_advisories()
            if self.engine.state.step % self.frame_every == 0:
                self._broadcast(self._frame())
            if self.pace > 0:
                target = wall0 + self.engine.state.step * self.dt * self.pace
                await asyncio.sleep(max(target - time.monotonic(), 0.0))
            else:
                await asyncio.sleep(0)
        if not self.finished:
            self.finished = True
            audit = self.engine.audit()
            self.engine.annotate("run-complete", {
                "residual_pct": audit.residual_pct}, source="sim")
            self._broadcast(self._frame())
            self._broadcast(json.dumps({
                "type": "end", "t": self.engine.state.step * self.dt,
                "residual_pct": audit.residual_pct}))
            log.info("run complete at t=%.3f s, audit residual %+.4f%%",
                     self.engine.state.step * self.dt, audit.residual_pct)

    # -- telemetry ---------------------------------------------------------

    def _collect_advisories(self) -> None:
        records = self.engine.trace.records
        for rec in records[self._events_cursor:]:
            if rec["rec"] == "event" and rec["kind"] in (
                    "under-supply", "soc-floor", "dispatch-infeasible",
                    "gen-stall", "dc-link-excursion"):
                self._advisories.append(
                    f"t={rec['t']:.2f}s {rec['kind']}")
            elif rec["rec"] == "event" and "advisory" in rec.get(
                    "payload", {}):
                self._advisories.append(str(rec["payload"]["advisory"]))
            elif rec["rec"] == "schedule" and rec["violations"]:
                self._advisories.append(
                    f"t={rec['t']:.2f}s dispatch {rec['mode']}: "
                    + ", ".join(rec["violations"]))
        self._events_cursor = len(records)

    def _frame(self) -> str:
        st = self.engine.state
        step_rec = next((r for r in reversed(self.engine.trace.records)
                         if r["rec"] == "step"), None)
        sched = st.schedule
        smap = self.scenario.sfoc_map
        gen: dict[str, Any] = {}
        volts: dict[str, float] = {}
        if step_rec is not None:
            volts = step_rec["v"]
            for gid, g in step_rec["gen"].items():
                sfoc = smap.sfoc(g["p"], g["w"]) \
                    if g["p"] > 0 and g["w"] > 0 else 0.0
                gen[gid] = {"p": g["p"], "w": g["w"], "sfoc": round(sfoc, 2)}
        ess = dict(step_rec["ess"]) if step_rec is not None else {
            "p": 0.0, "pb": 0.0, "pv": 0.0,
            "soc": st.pack.soc if st.pack else 0.0}
        ess["mode"] = sched.ess_mode if sched is not None else "idle"
        frame = {
            "type": "frame",
            "schema": TELEMETRY_SCHEMA,
            "seq": self._frame_seq,
            "t": step_rec["t"] if step_rec is not None else st.step * self.dt,
            "gen": gen,
            "ess": ess,
            "v": ({"min": min(volts.values()), "max": max(volts.values())}
                  if volts else {"min": 1.0, "max": 1.0}),
            "mission": st.mission,
            "mode": sched.mode if sched is not None else "",
            "sfoc": step_rec["sfoc"] if step_rec is not None else 0.0,
            "shadow": step_rec["shadow"] if step_rec is not None else 0.0,
            "advisories": list(self._advisories),
            "finished": self.finished,
        }
        self._frame_seq += 1
        return json.dumps(frame, separators=(",", ":"))

    def _broadcast(self, text: str) -> None:
        for q in self._subscribers.values():
            while q.full():            # bounded: drop the oldest frame
                try:
                    q.get_nowait()
                except asyncio.QueueEmpty:   # pragma: no cover - race-free
                    break
            q.put_nowait(text)

    def subscribe(self) -> tuple[int, asyncio.Queue[str]]:
        sid = self._next_sub
        self._next_sub += 1
        q: asyncio.Queue[str] = asyncio.Queue(maxsize=FRAME_BUFFER)
        self._subscribers[sid] = q
        return sid, q

    def unsubscribe(self, sid: int) -> None:
        self._subscribers.pop(sid, None)

    # -- commands ----------------------------------------------------------

    def apply_command(self, kind: str, payload: dict[str, Any]) -> dict[str, Any]:
        """Validate and queue one operator command; returns ack fields.
        Raises InjectError when the command cannot apply."""
        boundary_t = self.engine.state.step * self.dt
        if kind in ("set_mission", "inject_event", "approve_shed", "set_load") \
                and self.finished:
            raise InjectError("run complete; plant commands no longer apply")
        if kind == "set_mission":
            ev = ContingencyEvent(at=0.0, kind="mission-change",
                                  payload={"mission": payload.get("mission")})
            at = self.engine.inject(ev, source="gateway")
            return {"applied_t": at * self.dt}
        if kind == "inject_event":
            try:
                ev = ContingencyEvent(
                    at=float(payload.get("at", 0.0)),
                    kind=str(payload.get("kind", "")),
                    payload=payload.get("payload", {}))
            except (TypeError, ValueError) as exc:
                raise InjectError(str(exc)) from exc
            at = self.engine.inject(ev, source="gateway")
            return {"applied_t": at * self.dt}
        if kind == "approve_shed":
            ev = ContingencyEvent(at=0.0, kind="shed-approval",
                                  payload={"deficit_kw":
                                           payload.get("deficit_kw")})
            at = self.engine.inject(ev, source="gateway")
            return {"applied_t": at * self.dt}
        if kind == "set_load":
            loads = payload.get("loads")
            if not isinstance(loads, dict) or not loads:
                raise InjectError("set_load needs a non-empty 'loads' map")
            ev = ContingencyEvent(at=0.0, kind="load-step", payload=loads)
            at = self.engine.inject(ev, source="gateway")
            return {"applied_t": at * self.dt}
        if kind == "pause":
            self.paused = True
            self.engine.annotate("pause")
            return {"applied_t": boundary_t}
        if kind == "resume":
            self.paused = False
            self.engine.annotate("resume")
            return {"applied_t": boundary_t}
        if kind == "snapshot":
            self.engine.annotate("snapshot")
            return {"applied_t": boundary_t,
                    "snapshot": self.engine.snapshot()}
        raise InjectError(f"unknown command kind {kind!r}")


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------


def _console_dir() -> Path | None:
    for cand in (os.environ.get("PSV_CONSOLE_DIR"),
                 Path(__file__).resolve().parent / "static",
                 Path.cwd() / "frontend" / "dist"):
        if cand and Path(cand).is_dir():
            return Path(cand)
    return None


def create_app(scenario: Scenario, *, partitions: int | None = None,
               workers: int = 1, pace: float | None = None) -> FastAPI:
    session = GatewaySession(scenario, partitions=partitions, workers=workers,
                             pace=pace)

    @asynccontextmanager
    async def lifespan(_: FastAPI) -> AsyncIterator[None]:
        session.start()
        try:
            yield
        finally:
            await session.stop()

    app = FastAPI(title="psvsim gateway", lifespan=lifespan)
    app.state.session = session

    @app.get("/healthz")
    async def healthz() -> JSONResponse:
        return JSONResponse({"ok": True, "t": session.engine.state.step
                             * session.dt, "paused": session.paused,
                             "finished": session.finished})

    @app.get("/state")
    async def state() -> JSONResponse:
        return JSONResponse(session.engine.snapshot())

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        await ws.accept()
        sid, queue = session.subscribe()
        write_lock = asyncio.Lock()          # one writer at a time

        async def send(text: str) -> None:
            async with write_lock:
                await ws.send_text(text)

        st = session.engine.state
        await send(json.dumps({
            "type": "hello",
            "schema": TELEMETRY_SCHEMA,
            "scenario": scenario.name,
            "mission": st.mission,
            "dt": session.dt,
            "duration": scenario.sim.duration,
            "frame_hz": FRAME_HZ,
            "fleet": sorted(g.id for g in scenario.fleet),
            "loads": sorted(u.id for u in scenario.loads),
            "missions": sorted(MISSIONS),
            "t": st.step * session.dt,
        }))

        async def sender() -> None:
            while True:
                await send(await queue.get())

        send_task = asyncio.get_running_loop().create_task(sender())
        last_seq: int | None = None
        try:
            while True:
                raw = await ws.receive_text()
                reply = _handle_command(session, raw, last_seq)
                if reply.get("type") == "ack":
                    last_seq = reply["seq"]
                await send(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            session.unsubscribe(sid)

    console = _console_dir()
    if console is not None:
        app.mount("/", StaticFiles(directory=console, html=True),
                  name="console")
    else:
        @app.get("/")
        async def index() -> HTMLResponse:
            return HTMLResponse(_PLACEHOLDER)

    return app


def _handle_command(session: GatewaySession, raw: str,
                    last_seq: int | None) -> dict[str, Any]:
    """One command message in, one ack/nack dict out.  Malformed input never
    raises -- the session must survive anything a client sends."""
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as exc:
        return {"type": "nack", "seq": None,
                "reason": f"not valid JSON: {exc.msg}"}
    if not isinstance(msg, dict):
        return {"type": "nack", "seq": None,
                "reason": "command must be an object"}
    seq = msg.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool):
        return {"type": "nack", "seq": None,
                "reason": "command needs an integer 'seq'"}
    if last_seq is not None and seq <= last_seq:
        return {"type": "nack", "seq": seq,
                "reason": f"sequence must increase (last acked {last_seq})"}
    kind = msg.get("kind")
    if kind not in COMMAND_KINDS:
        return {"type": "nack", "seq": seq,
                "reason": f"unknown command kind {kind!r}"}
    payload = msg.get("payload", {})
    if not isinstance(payload, dict):
        return {"type": "nack", "seq": seq,
                "reason": "payload must be an object"}
    try:
        fields = session.apply_command(kind, payload)
    except InjectError as exc:
        return {"type": "nack", "seq": seq, "reason": str(exc)}
    return {"type": "ack", "seq": seq, "command": kind, **fields}


def serve(scenario: Scenario, *, host: str = "127.0.0.1", port: int = 8000,
          pace: float | None = None, partitions: int | None = None,
          workers: int = 1) -> None:
    """Blocking entry point: host one live session over HTTP + WebSocket."""
    import uvicorn
    app = create_app(scenario, partitions=partitions, workers=workers,
                     pace=pace)
    log.info("serving %s on %s:%d", scenario.name, host, port)
    uvicorn.run(app, host=host, port=port, log_level="warning")
