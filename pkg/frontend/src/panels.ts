/** Operator console panels: formatting helpers (pure, testable) and the DOM
 *  layer that binds them to the page and to the command sender. */

import { chartSvg } from "./chart.js";
import type { CommandKind, Frame, Hello } from "./protocol.js";
import type { CommandEntry, ConsoleState } from "./state.js";
import type { GatewayStatus } from "./connect.js";

export type CommandSender = (
  kind: CommandKind,
  payload?: Record<string, unknown>,
) => void;

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function fmtKw(v: number): string {
  return `${v.toFixed(Math.abs(v) < 10 ? 1 : 0)} kW`;
}

export function genTableHtml(frame: Frame, fleet: string[]): string {
  const rows = fleet.map((id) => {
    const g = frame.gen[id];
    if (g === undefined || (g.p === 0 && g.w === 0)) {
      return `<tr class="parked"><td>${escapeHtml(id)}</td>` +
        `<td>parked</td><td>—</td><td>—</td></tr>`;
    }
    return `<tr><td>${escapeHtml(id)}</td><td>${fmtKw(g.p)}</td>` +
      `<td>${g.w.toFixed(0)} rpm</td><td>${g.sfoc.toFixed(1)}</td></tr>`;
  });
  return `<table><thead><tr><th>unit</th><th>output</th><th>speed</th>` +
    `<th>g/kWh</th></tr></thead><tbody>${rows.join("")}</tbody></table>`;
}

export function essCardHtml(frame: Frame): string {
  const e = frame.ess;
  const soc = (e.soc * 100).toFixed(1);
  return `<div class="kv"><span>mode</span><b>${escapeHtml(e.mode)}</b></div>` +
    `<div class="kv"><span>terminal</span><b>${fmtKw(e.p)}</b></div>` +
    `<div class="kv"><span>battery</span><b>${fmtKw(e.pb)}</b></div>` +
    `<div class="kv"><span>pv</span><b>${fmtKw(e.pv)}</b></div>` +
    `<div class="kv"><span>soc</span><b>${soc} %</b></div>` +
    `<div class="socbar"><div class="socfill" style="width:${soc}%"></div></div>`;
}

export function plantCardHtml(frame: Frame): string {
  return `<div class="kv"><span>mission</span>` +
    `<b>${escapeHtml(frame.mission)}</b></div>` +
    `<div class="kv"><span>dispatch</span>` +
    `<b class="mode-${escapeHtml(frame.mode)}">${escapeHtml(frame.mode)}</b></div>` +
    `<div class="kv"><span>bus voltage</span>` +
    `<b>${frame.v.min.toFixed(3)} – ${frame.v.max.toFixed(3)} pu</b></div>` +
    `<div class="kv"><span>fleet SFOC</span>` +
    `<b>${frame.sfoc.toFixed(1)} g/kWh</b></div>` +
    `<div class="kv"><span>fixed-speed shadow</span>` +
    `<b>${frame.shadow.toFixed(1)} g/kWh</b></div>`;
}

export function statusLineHtml(
  hello: Hello | null,
  frame: Frame | null,
  status: GatewayStatus,
  residualPct: number | null,
): string {
  const name = hello === null ? "—" : escapeHtml(hello.scenario);
  const t = frame === null ? (hello?.t ?? 0) : frame.t;
  const dur = hello?.duration ?? 0;
  let tail = `<span class="status-${status}">${status}</span>`;
  if (residualPct !== null) {
    tail += ` · energy residual ${residualPct.toFixed(3)} %`;
  }
  return `<b>${name}</b> · t = ${t.toFixed(2)} / ${dur.toFixed(1)} s · ${tail}`;
}

export function advisoryListHtml(advisories: string[]): string {
  if (advisories.length === 0) {
    return `<span class="quiet">no pending advisories</span>`;
  }
  return `<ul>${advisories
    .map((a) => `<li>${escapeHtml(a)}</li>`)
    .join("")}</ul>`;
}

export function commandLogHtml(entries: CommandEntry[], limit = 8): string {
  const recent = entries.slice(-limit).reverse();
  if (recent.length === 0) {
    return `<span class="quiet">no commands sent</span>`;
  }
  return `<ul>${recent
    .map((c) =>
      `<li class="cmd-${c.status}">#${c.seq} ${escapeHtml(c.kind)}` +
      ` — ${c.status}${c.detail ? ": " + escapeHtml(c.detail) : ""}</li>`)
    .join("")}</ul>`;
}

const SKELETON = `
<header id="statusline"></header>
<main>
  <section class="col">
    <h2>fuel intensity</h2>
    <div id="chart"></div>
    <h2>generators</h2>
    <div id="gens"></div>
  </section>
  <section class="col">
    <h2>plant</h2>
    <div id="plant" class="card"></div>
    <h2>storage</h2>
    <div id="ess" class="card"></div>
    <h2>shed advisories</h2>
    <div id="advisories" class="card"></div>
    <button id="approve-shed" hidden>approve shed plan</button>
  </section>
  <section class="col">
    <h2>commands</h2>
    <div class="card controls">
      <label>mission
        <select id="mission-select"></select>
      </label>
      <button id="set-mission">change mission</button>
      <label>load
        <select id="load-select"></select>
        <input id="load-kw" type="number" step="10" value="-300"> kW
      </label>
      <button id="set-load">set load</button>
      <div class="row">
        <button id="pause">pause</button>
        <button id="resume">resume</button>
        <button id="snapshot">snapshot</button>
      </div>
    </div>
    <h2>command log</h2>
    <div id="cmdlog" class="card"></div>
  </section>
</main>`;

/** Builds the page skeleton once, then repaints panels from ConsoleState on
 *  every change.  All operator actions funnel through one CommandSender. */
export class ConsolePanels {
  private readonly el: Record<string, HTMLElement> = {};
  private populated = false;
  private status: GatewayStatus = "connecting";

  constructor(root: HTMLElement, send: CommandSender) {
    root.innerHTML = SKELETON;
    for (const id of ["statusline", "chart", "gens", "plant", "ess",
                      "advisories", "cmdlog"]) {
      this.el[id] = root.querySelector<HTMLElement>(`#${id}`)!;
    }
    const pick = <T extends HTMLElement>(id: string): T =>
      root.querySelector<T>(`#${id}`)!;
    const missionSelect = pick<HTMLSelectElement>("mission-select");
    const loadSelect = pick<HTMLSelectElement>("load-select");
    const loadKw = pick<HTMLInputElement>("load-kw");
    this.missionSelect = missionSelect;
    this.loadSelect = loadSelect;
    this.approveShed = pick<HTMLButtonElement>("approve-shed");

    pick("set-mission").onclick = () =>
      send("set_mission", { mission: missionSelect.value });
    pick("set-load").onclick = () =>
      send("set_load",
           { loads: { [loadSelect.value]: Number(loadKw.value) } });
    this.approveShed.onclick = () => send("approve_shed", {});
    pick("pause").onclick = () => send("pause");
    pick("resume").onclick = () => send("resume");
    pick("snapshot").onclick = () => send("snapshot");
  }

  private readonly missionSelect: HTMLSelectElement;
  private readonly loadSelect: HTMLSelectElement;
  private readonly approveShed: HTMLButtonElement;

  setStatus(status: GatewayStatus): void {
    this.status = status;
  }

  render(state: ConsoleState): void {
    const { hello, frame } = state;
    if (hello !== null && !this.populated) {
      this.missionSelect.innerHTML = hello.missions
        .map((m) => `<option>${escapeHtml(m)}</option>`)
        .join("");
      this.loadSelect.innerHTML = hello.loads
        .map((l) => `<option>${escapeHtml(l)}</option>`)
        .join("");
      this.populated = true;
    }
    this.el["statusline"].innerHTML = statusLineHtml(
      hello, frame, this.status, state.end?.residual_pct ?? null);
    if (frame !== null) {
      this.el["gens"].innerHTML =
        genTableHtml(frame, hello?.fleet ?? Object.keys(frame.gen));
      this.el["plant"].innerHTML = plantCardHtml(frame);
      this.el["ess"].innerHTML = essCardHtml(frame);
      this.el["advisories"].innerHTML = advisoryListHtml(frame.advisories);
      this.approveShed.hidden = frame.advisories.length === 0;
    }
    this.el["cmdlog"].innerHTML = commandLogHtml(state.commands);
    if (state.history.length >= 2) {
      this.el["chart"].innerHTML = chartSvg([
        { label: "optimized", css: "line-actual",
          points: state.history.map((s) => [s.t, s.sfoc]) },
        { label: "fixed 1800 rpm", css: "line-shadow",
          points: state.history.map((s) => [s.t, s.shadow]) },
      ], { yUnit: "", xUnit: " s" });
    }
  }
}
