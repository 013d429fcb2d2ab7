/** Console bootstrap: dial the gateway that served this page and keep the
 *  panels repainting from its telemetry. */

import { GatewayClient } from "./connect.js";
import { ConsolePanels } from "./panels.js";
import type { CommandKind } from "./protocol.js";

const root = document.getElementById("console-root");
if (root === null) {
  throw new Error("missing #console-root element");
}

let client: GatewayClient | null = null;

const panels = new ConsolePanels(
  root,
  (kind: CommandKind, payload: Record<string, unknown> = {}) => {
    try {
      client?.command(kind, payload);
    } catch (err) {
      console.warn("command not sent:", err);
    }
  },
);

const proto = location.protocol === "https:" ? "wss" : "ws";
client = new GatewayClient(`${proto}://${location.host}/ws`, {
  onChange: (state) => panels.render(state),
  onStatus: (status) => {
    panels.setStatus(status);
    if (client !== null) panels.render(client.state);
  },
  onProtocolError: (err) => console.warn("bad gateway message:", err),
});
client.connect();
