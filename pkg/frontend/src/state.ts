/** Scoreboard view state and its reducer.
 *
 * The state is a pure mirror of what the server said plus presentation
 * bookkeeping (feed, toasts, connection flags). No health or clock value
 * is ever computed here; the server stream is the single source of truth,
 * so replaying the same snapshot is a no-op and pausing freezes every
 * displayed number simply because the server stops changing them.
 */

import type { EventFrame, ScoreFrame, ServerFrame } from "./types.js";

export type Role = "spectator" | "player" | "operator";

export interface FeedEntry {
  seq: number;
  tick: number;
  timestamp: number;
  player: string;
  text: string;
}

export interface Toast {
  id: number;
  text: string;
}

export interface ViewState {
  gameId: string;
  role: Role;
  /** Own player name; only meaningful when role is "player". */
  selfName: string;
  connected: boolean;
  everConnected: boolean;
  /** Server said the game id does not exist. */
  missing: boolean;
  score: ScoreFrame | null;
  feed: FeedEntry[];
  seenSeq: Set<number>;
  /** Highest unit health ever seen in this game. Units all start at the
   * same full health, so this is the bar scale; display-only, never fed
   * back into any game number. */
  healthScale: number;
  toasts: Toast[];
  /** txn -> op for controls awaiting a server answer. */
  pending: Record<string, string>;
  nextToastId: number;
}

export type UiMsg =
  | { t: "open" }
  | { t: "closed" }
  | { t: "frame"; frame: ServerFrame }
  | { t: "control_sent"; txn: string; op: string }
  | { t: "toast_done"; id: number };

const FEED_CAP = 200;

export function initialState(gameId: string, role: Role, selfName = ""): ViewState {
  return {
    gameId,
    role,
    selfName,
    connected: false,
    everConnected: false,
    missing: false,
    score: null,
    feed: [],
    seenSeq: new Set(),
    healthScale: 0,
    toasts: [],
    pending: {},
    nextToastId: 1,
  };
}

/** One human line per feed-worthy event; null for noise (raw commands,
 * ordinary decay ticks). */
export function describeEvent(ev: EventFrame): string | null {
  const d = ev.data as Record<string, any>;
  switch (ev.kind) {
    case "registered":
      return `${ev.player} registered from ${d.host ?? "?"}`;
    case "phase":
      return `match ${d.phase ?? "?"}`;
    case "capture":
      return `${d.attacker ?? "?"} captured ${shortId(String(d.unit ?? "?"))} (${ev.player})`;
    case "health":
      // decay ticks are noise; a unit dying is news
      return d.alive === false ? `${ev.player} lost ${shortId(String(d.unit ?? "?"))}` : null;
    case "clock":
      return d.active_player ? `clock pressed, ${d.active_player} to move` : "clock pressed";
    case "reshuffle":
      return `${ev.player} unit reshuffled: ${shortId(String(d.old_unit ?? "?"))} -> ` +
        `${shortId(String(d.new_unit ?? "?"))}`;
    case "winner":
      if (d.draw) return `draw: ${d.reason ?? ""}`;
      return `${d.winner ?? "?"} wins: ${d.reason ?? ""}`;
    default:
      return null;
  }
}

export function shortId(id: string): string {
  return id.length > 8 ? id.slice(0, 8) : id;
}

function applyScore(state: ViewState, frame: ScoreFrame): void {
  if (frame.game_id !== state.gameId) return;
  state.score = frame;
  for (const board of Object.values(frame.players)) {
    for (const u of board.units) {
      if (u.health > state.healthScale) state.healthScale = u.health;
    }
  }
  if (frame.txn && state.pending[frame.txn]) {
    delete state.pending[frame.txn];
  }
}

function applyEvent(state: ViewState, frame: EventFrame): void {
  if (frame.game_id !== state.gameId) return;
  if (state.seenSeq.has(frame.seq)) return; // fan-out copy or replay
  state.seenSeq.add(frame.seq);
  const text = describeEvent(frame);
  if (text === null) return;
  state.feed.push({
    seq: frame.seq,
    tick: frame.tick,
    timestamp: frame.timestamp,
    player: frame.player,
    text,
  });
  // display cap; entries are never reordered or rewritten
  if (state.feed.length > FEED_CAP) state.feed.splice(0, state.feed.length - FEED_CAP);
}

function applyError(state: ViewState, reason: string, txn: string | undefined): void {
  if (txn && state.pending[txn]) {
    const op = state.pending[txn];
    delete state.pending[txn];
    state.toasts.push({ id: state.nextToastId++, text: `${op} rejected: ${reason}` });
    return;
  }
  // an unsolicited error right after connect is the bridge refusing the
  // game id; anything else is still worth surfacing
  if (/unknown game/.test(reason) && state.score === null) {
    state.missing = true;
    return;
  }
  state.toasts.push({ id: state.nextToastId++, text: reason });
}

/** Advance the view state by one message. Mutates and returns `state`. */
export function reduce(state: ViewState, msg: UiMsg): ViewState {
  switch (msg.t) {
    case "open":
      state.connected = true;
      state.everConnected = true;
      break;
    case "closed":
      state.connected = false;
      break;
    case "control_sent":
      state.pending[msg.txn] = msg.op;
      break;
    case "toast_done":
      state.toasts = state.toasts.filter((t) => t.id !== msg.id);
      break;
    case "frame":
      if (msg.frame.type === "score") applyScore(state, msg.frame);
      else if (msg.frame.type === "event") applyEvent(state, msg.frame);
      else applyError(state, msg.frame.reason, msg.frame.txn);
      break;
  }
  return state;
}
