/** Wire protocol of the psvsim operator gateway (schema 1).
 *
 * The gateway speaks JSON text messages over a single WebSocket.  The first
 * message is always `hello`; telemetry `frame`s follow at `frame_hz` of
 * simulated time; each operator command is answered by exactly one `ack` or
 * `nack` echoing the client-chosen `seq`; `end` marks a finished run.
 */

export const SCHEMA = 1;

export interface GenTelemetry {
  /** electrical output, kW (0 while parked) */
  p: number;
  /** engine speed, rpm */
  w: number;
  /** unit specific fuel consumption at the present point, g/kWh */
  sfoc: number;
}

export interface EssTelemetry {
  /** terminal power into the grid, kW (positive = discharging) */
  p: number;
  /** battery-side power, kW (positive = discharging) */
  pb: number;
  /** photovoltaic contribution, kW */
  pv: number;
  /** state of charge, 0..1 */
  soc: number;
  /** scheduler mode: discharge / fast-charge / pv-charge / idle / offline */
  mode: string;
}

export interface Hello {
  type: "hello";
  schema: number;
  scenario: string;
  mission: string;
  dt: number;
  duration: number;
  frame_hz: number;
  fleet: string[];
  loads: string[];
  missions: string[];
  t: number;
}

export interface Frame {
  type: "frame";
  schema: number;
  seq: number;
  t: number;
  gen: Record<string, GenTelemetry>;
  ess: EssTelemetry;
  v: { min: number; max: number };
  mission: string;
  mode: string;
  /** fleet load-weighted SFOC at scheduled speeds, g/kWh */
  sfoc: number;
  /** same fleet point evaluated at a fixed 1800 rpm, g/kWh */
  shadow: number;
  advisories: string[];
  finished: boolean;
}

export interface Ack {
  type: "ack";
  seq: number;
  command: string;
  applied_t: number;
  snapshot?: unknown;
}

export interface Nack {
  type: "nack";
  seq: number | null;
  reason: string;
}

export interface End {
  type: "end";
  t: number;
  residual_pct: number;
}

export type ServerMessage = Hello | Frame | Ack | Nack | End;

export const COMMAND_KINDS = [
  "set_mission",
  "inject_event",
  "approve_shed",
  "set_load",
  "pause",
  "resume",
  "snapshot",
] as const;

export type CommandKind = (typeof COMMAND_KINDS)[number];

export class ProtocolError extends Error {}

const REQUIRED: Record<string, string[]> = {
  hello: ["schema", "scenario", "mission", "dt", "duration", "frame_hz",
          "fleet", "loads", "missions", "t"],
  frame: ["schema", "seq", "t", "gen", "ess", "v", "mission", "mode",
          "sfoc", "shadow", "advisories", "finished"],
  ack: ["seq", "command", "applied_t"],
  nack: ["seq", "reason"],
  end: ["t", "residual_pct"],
};

/** Parse one raw WebSocket text message into a typed server message.
 *  Throws ProtocolError on anything that is not a well-formed message. */
export function parseMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new ProtocolError(`not JSON: ${raw.slice(0, 60)}`);
  }
  if (typeof data !== "object" || data === null || Array.isArray(data)) {
    throw new ProtocolError("message must be a JSON object");
  }
  const msg = data as Record<string, unknown>;
  const type = msg["type"];
  if (typeof type !== "string" || !(type in REQUIRED)) {
    throw new ProtocolError(`unknown message type ${JSON.stringify(type)}`);
  }
  for (const key of REQUIRED[type]) {
    if (!(key in msg)) {
      throw new ProtocolError(`${type}: missing field '${key}'`);
    }
  }
  return msg as unknown as ServerMessage;
}

/** Encode one operator command.  `seq` must strictly exceed the last seq
 *  the server acknowledged on this connection (nacked numbers may be
 *  retried); payload fields are command-specific. */
export function encodeCommand(
  seq: number,
  kind: CommandKind,
  payload: Record<string, unknown> = {},
): string {
  return JSON.stringify({ seq, kind, payload });
}
