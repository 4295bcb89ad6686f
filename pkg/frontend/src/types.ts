/** Wire schema of the game server's websocket bridge.
 *
 * Every frame is one JSON object with a "type" tag. The scoreboard only
 * ever consumes "score", "event" and "error" frames and only ever sends
 * "control" frames; anything else is ignored.
 */

export interface UnitRow {
  id: string;
  class_id: string;
  port: number;
  health: number;
  code: number;
  alive: boolean;
}

export interface MetricsRow {
  copm: number;
  copm_sliding: number;
  cpm: number;
  epm: number;
  cope: number;
  consistency: number;
  commands: number;
  keystrokes: number;
}

export interface PlayerBoard {
  health_sum: number;
  alive: number;
  destroyed_fraction: number;
  opponent: string;
  units: UnitRow[];
  metrics: MetricsRow;
}

export interface ClockView {
  mode: "objective" | "time" | "speed";
  elapsed: number;
  paused: boolean;
  time_limit?: number;
  remaining?: Record<string, number>;
  active_player?: string | null;
}

export interface ScoreFrame {
  type: "score";
  game_id: string;
  timestamp: number;
  tick: number;
  phase: string;
  winner: string | null;
  draw: boolean;
  paused: boolean;
  players: Record<string, PlayerBoard>;
  clock: ClockView;
  txn?: string;
}

export interface EventFrame {
  type: "event";
  game_id: string;
  seq: number;
  tick: number;
  timestamp: number;
  kind: string;
  player: string;
  data: Record<string, unknown>;
}

export interface ErrorFrame {
  type: "error";
  reason: string;
  field_name: string;
  txn?: string;
}

export type ServerFrame = ScoreFrame | EventFrame | ErrorFrame;

export interface ControlMsg {
  type: "control";
  game_id: string;
  op: "start" | "pause" | "resume" | "clock_press";
  player: string;
  timestamp: number;
  txn: string;
}

/** Parse one websocket text payload; null for anything that is not a
 * well-formed frame the scoreboard knows. */
export function parseFrame(text: string): ServerFrame | null {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const tag = (obj as { type?: unknown }).type;
  if (tag === "score" || tag === "event" || tag === "error") {
    return obj as ServerFrame;
  }
  return null;
}
