/** Gateway connection: one WebSocket, a ConsoleState kept current, and
 *  command sequencing.  Socket construction is injectable so tests can run
 *  the whole operator loop against a scripted fake. */

import type { CommandKind, ServerMessage } from "./protocol.js";
import { encodeCommand, parseMessage } from "./protocol.js";
import { ConsoleState } from "./state.js";

/** The subset of the browser WebSocket surface the client relies on. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type GatewayStatus = "connecting" | "open" | "closed" | "ended";

export interface GatewayOptions {
  /** defaults to `new WebSocket(url)` */
  socketFactory?: SocketFactory;
  /** ms before redialing after an unexpected close; negative disables */
  reconnectDelayMs?: number;
  /** fired after every state change (message applied or command sent) */
  onChange?: (state: ConsoleState, msg: ServerMessage | null) => void;
  onStatus?: (status: GatewayStatus) => void;
  onProtocolError?: (err: Error) => void;
}

export class GatewayClient {
  readonly state = new ConsoleState();
  status: GatewayStatus = "closed";

  private seq = 0;
  private socket: SocketLike | null = null;
  private closedByUser = false;
  private redial: ReturnType<typeof setTimeout> | null = null;

  constructor(
    readonly url: string,
    private readonly opts: GatewayOptions = {},
  ) {}

  connect(): void {
    this.closedByUser = false;
    const factory =
      this.opts.socketFactory ??
      ((u: string) => new WebSocket(u) as unknown as SocketLike);
    this.setStatus("connecting");
    const sock = factory(this.url);
    this.socket = sock;
    sock.onopen = () => this.setStatus("open");
    sock.onmessage = (ev) => this.handle(ev.data);
    sock.onerror = () => {};
    sock.onclose = () => {
      if (this.socket !== sock) return;
      this.socket = null;
      if (this.state.end !== null) {
        this.setStatus("ended");
      } else {
        this.setStatus("closed");
        this.scheduleRedial();
      }
    };
  }

  /** Send one operator command; returns its seq.  Throws when the
   *  connection is not open. */
  command(kind: CommandKind, payload: Record<string, unknown> = {}): number {
    if (this.socket === null || this.status !== "open") {
      throw new Error("gateway connection is not open");
    }
    const seq = ++this.seq;
    this.state.record(seq, kind);
    this.socket.send(encodeCommand(seq, kind, payload));
    this.opts.onChange?.(this.state, null);
    return seq;
  }

  close(): void {
    this.closedByUser = true;
    if (this.redial !== null) {
      clearTimeout(this.redial);
      this.redial = null;
    }
    const sock = this.socket;
    this.socket = null;
    sock?.close();
    this.setStatus("closed");
  }

  private handle(raw: string): void {
    let msg: ServerMessage;
    try {
      msg = parseMessage(raw);
    } catch (err) {
      this.opts.onProtocolError?.(err as Error);
      return;
    }
    this.state.apply(msg);
    if (msg.type === "end") this.setStatus("ended");
    this.opts.onChange?.(this.state, msg);
  }

  private scheduleRedial(): void {
    const delay = this.opts.reconnectDelayMs ?? 1000;
    if (this.closedByUser || delay < 0 || this.state.end !== null) return;
    this.redial = setTimeout(() => {
      this.redial = null;
      this.connect();
    }, delay);
  }

  private setStatus(status: GatewayStatus): void {
    if (this.status === status) return;
    this.status = status;
    this.opts.onStatus?.(status);
  }
}
