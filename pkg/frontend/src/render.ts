/** DOM renderer: one idempotent full re-render per state change.
 *
 * Every number on screen is copied verbatim from the latest score frame.
 * Clocks in particular are not animated locally, so a paused (or silent)
 * server visibly freezes them, and a replayed snapshot renders the exact
 * same page.
 */

import type { ViewState } from "./state.js";
import { shortId } from "./state.js";
import type { ClockView, MetricsRow, PlayerBoard, ScoreFrame } from "./types.js";

function el(tag: string, className = "", text = ""): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function fmt(n: number, digits = 1): string {
  return n.toFixed(digits);
}

function renderClock(clock: ClockView, paused: boolean): HTMLElement {
  const box = el("section", "sb-clock");
  box.append(el("span", "sb-clock-mode", clock.mode));
  const elapsed = el("span", "sb-clock-elapsed", `${fmt(clock.elapsed)}s`);
  box.append(elapsed);
  if (clock.mode === "time" && clock.time_limit != null) {
    box.append(el("span", "sb-clock-limit", `of ${fmt(clock.time_limit)}s`));
  }
  if (clock.mode === "speed" && clock.remaining) {
    for (const [name, left] of Object.entries(clock.remaining).sort()) {
      const cls = name === clock.active_player ? "sb-clock-remaining active" : "sb-clock-remaining";
      const chip = el("span", cls, `${name} ${fmt(left)}s`);
      chip.dataset.player = name;
      box.append(chip);
    }
  }
  if (paused) box.append(el("span", "sb-paused", "paused"));
  return box;
}

function renderMetrics(m: MetricsRow): HTMLElement {
  const dl = el("dl", "sb-metrics");
  const rows: [string, string, string][] = [
    ["copm", "cmd/min", fmt(m.copm, 2)],
    ["copm-sliding", "cmd/min (10s)", fmt(m.copm_sliding, 2)],
    ["cpm", "keys/min", fmt(m.cpm, 2)],
    ["epm", "errors/min", fmt(m.epm, 2)],
    ["cope", "cmds/entry", fmt(m.cope, 2)],
    ["consistency", "consistency", fmt(m.consistency, 2)],
  ];
  for (const [key, label, value] of rows) {
    dl.append(el("dt", "", label));
    const dd = el("dd", `sb-metric-${key}`, value);
    dl.append(dd);
  }
  return dl;
}

function renderUnit(
  u: PlayerBoard["units"][number],
  scale: number,
  detailed: boolean,
): HTMLElement {
  const row = el("div", u.alive ? "sb-unit" : "sb-unit dead");
  row.dataset.unit = u.id;
  const label = detailed
    ? `${shortId(u.id)} ${u.class_id} :${u.port} [${u.code}]`
    : shortId(u.id);
  row.append(el("span", "sb-unit-label", label));
  const bar = el("div", "sb-bar");
  const fill = el("div", "sb-bar-fill");
  const pct = scale > 0 ? Math.max(0, Math.min(100, (u.health / scale) * 100)) : 0;
  fill.style.width = `${pct}%`;
  bar.append(fill);
  row.append(bar);
  row.append(el("span", "sb-unit-health", fmt(u.health)));
  return row;
}

function renderAggregate(name: string, board: PlayerBoard): HTMLElement {
  const box = el("div", "sb-aggregate");
  box.append(el("div", "sb-aggregate-line",
    `${board.alive} unit(s) alive, total health ${fmt(board.health_sum)}`));
  return box;
}

function renderPlayer(state: ViewState, name: string, board: PlayerBoard): HTMLElement {
  const score = state.score as ScoreFrame;
  const col = el("div", "sb-player");
  col.dataset.player = name;
  const active = score.clock.mode === "speed" && score.clock.active_player === name;
  col.append(el("h2", active ? "sb-player-name active" : "sb-player-name", name));
  col.append(el("div", "sb-health-sum", fmt(board.health_sum)));

  // a player sees their own realm in full; the opponent is derived score only
  const ownView = state.role === "player";
  const isSelf = name === state.selfName;
  if (ownView && !isSelf) {
    col.append(renderAggregate(name, board));
  } else {
    const units = el("div", "sb-units");
    for (const u of board.units) {
      units.append(renderUnit(u, state.healthScale, ownView && isSelf));
    }
    col.append(units);
  }
  col.append(renderMetrics(board.metrics));
  return col;
}

function renderFeed(state: ViewState): HTMLElement {
  const box = el("section", "sb-feed");
  box.append(el("h2", "", "events"));
  const list = el("ol", "sb-feed-list");
  for (let i = state.feed.length - 1; i >= 0; i--) {
    const entry = state.feed[i]!;
    const li = el("li", "sb-feed-entry", `[t=${fmt(entry.timestamp)}] ${entry.text}`);
    li.dataset.seq = String(entry.seq);
    list.append(li);
  }
  box.append(list);
  return box;
}

function renderControls(state: ViewState): HTMLElement {
  const box = el("section", "sb-controls");
  const enabled = state.connected && !state.missing;
  const mk = (op: string, label: string, player = "") => {
    const b = el("button", "sb-control", label) as HTMLButtonElement;
    b.dataset.op = op;
    if (player) b.dataset.player = player;
    b.disabled = !enabled;
    return b;
  };
  box.append(mk("start", "start"), mk("pause", "pause"), mk("resume", "resume"));
  if (state.score && state.score.clock.mode === "speed") {
    for (const name of Object.keys(state.score.players).sort()) {
      box.append(mk("clock_press", `press (${name})`, name));
    }
  }
  return box;
}

export function render(root: HTMLElement, state: ViewState): void {
  root.textContent = "";
  const page = el("div", "sb");

  const header = el("header", "sb-header");
  header.append(el("h1", "sb-title", `game ${state.gameId}`));
  if (state.score) {
    header.append(el("span", "sb-phase", state.score.phase));
    if (state.score.phase === "finished") {
      const text = state.score.draw
        ? "draw"
        : state.score.winner
          ? `${state.score.winner} wins`
          : "finished";
      header.append(el("span", "sb-winner", text));
    }
  }
  page.append(header);

  if (state.missing) {
    const empty = el("div", "sb-empty");
    empty.append(el("p", "", `no game "${state.gameId}" on this server`));
    empty.append(el("p", "", "check the ?game= parameter in the address bar"));
    page.append(empty);
    root.append(page);
    return;
  }

  if (state.everConnected && !state.connected) {
    page.append(el("div", "sb-banner-stale",
      "connection lost, reconnecting; showing the last known state"));
  }

  if (state.score) {
    page.append(renderClock(state.score.clock, state.score.paused));
    const players = el("section", "sb-players");
    for (const [name, board] of Object.entries(state.score.players).sort()) {
      players.append(renderPlayer(state, name, board));
    }
    page.append(players);
  } else {
    page.append(el("div", "sb-waiting", "waiting for the first score frame"));
  }

  page.append(renderFeed(state));
  if (state.role === "operator") page.append(renderControls(state));

  const toasts = el("div", "sb-toasts");
  for (const toast of state.toasts) {
    const t = el("div", "sb-toast", toast.text);
    t.dataset.toastId = String(toast.id);
    toasts.append(t);
  }
  page.append(toasts);

  root.append(page);
}
