/** Console-side session state: the latest plant picture, the SFOC history
 *  feeding the chart, and the lifecycle of every command we sent. */

import type {
  CommandKind,
  End,
  Frame,
  Hello,
  ServerMessage,
} from "./protocol.js";

export interface SfocSample {
  t: number;
  /** fleet SFOC at scheduled speeds, g/kWh */
  sfoc: number;
  /** fleet SFOC at fixed 1800 rpm, g/kWh */
  shadow: number;
  /** storage terminal power, kW (positive = discharging) */
  essKw: number;
}

export type CommandStatus = "pending" | "applied" | "rejected";

export interface CommandEntry {
  seq: number;
  kind: CommandKind;
  status: CommandStatus;
  detail: string;
}

export class ConsoleState {
  hello: Hello | null = null;
  frame: Frame | null = null;
  end: End | null = null;
  history: SfocSample[] = [];
  commands: CommandEntry[] = [];
  snapshot: unknown = null;
  /** frames the server dropped for this consumer (seq gaps) */
  droppedFrames = 0;

  private lastSeq = -1;

  constructor(readonly historyLimit = 4096) {}

  apply(msg: ServerMessage): void {
    switch (msg.type) {
      case "hello":
        // a fresh hello starts a session (or a reconnect into a running
        // plant): the plant picture resets, the command ledger survives
        this.hello = msg;
        this.frame = null;
        this.end = null;
        this.history = [];
        this.lastSeq = -1;
        break;
      case "frame":
        if (this.lastSeq >= 0 && msg.seq > this.lastSeq + 1) {
          this.droppedFrames += msg.seq - this.lastSeq - 1;
        }
        this.lastSeq = msg.seq;
        this.frame = msg;
        this.history.push({
          t: msg.t,
          sfoc: msg.sfoc,
          shadow: msg.shadow,
          essKw: msg.ess.p,
        });
        if (this.history.length > this.historyLimit) {
          this.history.splice(0, this.history.length - this.historyLimit);
        }
        break;
      case "ack":
        this.settle(msg.seq, "applied",
                    `applied at t=${msg.applied_t.toFixed(2)} s`);
        if (msg.command === "snapshot" && msg.snapshot !== undefined) {
          this.snapshot = msg.snapshot;
        }
        break;
      case "nack":
        if (msg.seq !== null) {
          this.settle(msg.seq, "rejected", msg.reason);
        }
        break;
      case "end":
        this.end = msg;
        break;
    }
  }

  /** Register a command the client just sent; resolved by its ack/nack. */
  record(seq: number, kind: CommandKind): void {
    this.commands.push({ seq, kind, status: "pending", detail: "" });
  }

  get advisories(): string[] {
    return this.frame?.advisories ?? [];
  }

  get finished(): boolean {
    return this.end !== null || (this.frame?.finished ?? false);
  }

  private settle(seq: number, status: CommandStatus, detail: string): void {
    const entry = this.commands.find((c) => c.seq === seq);
    if (entry) {
      entry.status = status;
      entry.detail = detail;
    }
  }
}
