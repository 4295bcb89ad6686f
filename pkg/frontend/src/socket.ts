/** Websocket wrapper: reconnection with capped backoff, control sends
 * tagged with a txn so replies (score or error) can be correlated.
 *
 * The constructor takes a WebSocket factory so tests can plug in a node
 * client; the browser default is used otherwise.
 */

import { parseFrame, type ControlMsg } from "./types.js";
import type { UiMsg } from "./state.js";

export interface WsLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
  readyState: number;
}

export type WsFactory = (url: string) => WsLike;

const OPEN = 1;

export class ScoreSocket {
  private ws: WsLike | null = null;
  private stopped = false;
  private attempts = 0;
  private txnCounter = 1;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly gameId: string,
    private readonly onMsg: (msg: UiMsg) => void,
    private readonly makeWs: WsFactory = (u) => new WebSocket(u) as unknown as WsLike,
  ) {}

  connect(): void {
    if (this.stopped) return;
    const ws = this.makeWs(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.attempts = 0;
      this.onMsg({ t: "open" });
    };
    ws.onmessage = (ev) => {
      const text = typeof ev.data === "string" ? ev.data : String(ev.data);
      const frame = parseFrame(text);
      if (frame) this.onMsg({ t: "frame", frame });
    };
    ws.onerror = () => {
      // the close handler owns reconnection; errors always precede a close
    };
    ws.onclose = () => {
      if (this.ws !== ws) return; // an old socket going away
      this.ws = null;
      this.onMsg({ t: "closed" });
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    const wait = Math.min(500 * 2 ** this.attempts, 5000);
    this.attempts++;
    this.timer = setTimeout(() => this.connect(), wait);
  }

  /** Send one operator op; returns its txn, or null when not connected. */
  control(op: ControlMsg["op"], player = ""): string | null {
    if (!this.ws || this.ws.readyState !== OPEN) return null;
    const txn = `ui${this.txnCounter++}`;
    const msg: ControlMsg = {
      type: "control",
      game_id: this.gameId,
      op,
      player,
      timestamp: Date.now() / 1000,
      txn,
    };
    this.ws.send(JSON.stringify(msg));
    this.onMsg({ t: "control_sent", txn, op });
    return txn;
  }

  close(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    if (this.ws) {
      const ws = this.ws;
      this.ws = null;
      try {
        ws.close();
      } catch {
        // already gone
      }
    }
  }
}
