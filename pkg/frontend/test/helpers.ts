import { readFileSync } from "node:fs";

import type { Frame, Hello, ServerMessage } from "../src/protocol.js";
import { parseMessage } from "../src/protocol.js";

/** Raw lines of a recorded gateway session (see scripts/record_fixture.py). */
export function sessionLines(name = "case8a_session.jsonl"): string[] {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return readFileSync(url, "utf8").trim().split("\n");
}

export function sessionMessages(name?: string): ServerMessage[] {
  return sessionLines(name).map(parseMessage);
}

export function sessionFrames(name?: string): Frame[] {
  return sessionMessages(name).filter(
    (m): m is Frame => m.type === "frame");
}

export function sessionHello(name?: string): Hello {
  const first = sessionMessages(name)[0];
  if (first.type !== "hello") throw new Error("fixture must start with hello");
  return first;
}
