/** Page wiring: query params -> state -> socket -> render loop.
 *
 * ?game=g-1            which game to watch (required)
 * ?role=spectator      spectator (default) | player | operator
 * ?name=alice          own player name, used by role=player
 * ?ws=host:port        bridge address, defaults to the page's own host
 */

import { initialState, reduce, type Role, type UiMsg } from "./state.js";
import { render } from "./render.js";
import { ScoreSocket } from "./socket.js";

function param(name: string, fallback = ""): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

const TOAST_MS = 6000;

function start(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");

  const gameId = param("game", "g-1");
  const roleParam = param("role", "spectator");
  const role: Role = roleParam === "player" || roleParam === "operator" ? roleParam : "spectator";
  const state = initialState(gameId, role, param("name"));

  const wsHost = param("ws", window.location.host);
  const socket = new ScoreSocket(
    `ws://${wsHost}/ws/game/${encodeURIComponent(gameId)}`,
    gameId,
    (msg: UiMsg) => {
      const hadToasts = state.toasts.length;
      reduce(state, msg);
      if (state.missing) socket.close(); // no game: stop knocking
      for (const toast of state.toasts.slice(hadToasts)) {
        setTimeout(() => {
          reduce(state, { t: "toast_done", id: toast.id });
          render(root, state);
        }, TOAST_MS);
      }
      render(root, state);
    },
  );

  // operator buttons carry data-op (and data-player for clock presses)
  root.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement | null;
    const op = target?.dataset?.op;
    if (!op) return;
    socket.control(op as "start" | "pause" | "resume" | "clock_press",
      target?.dataset?.player ?? "");
    render(root, state);
  });

  render(root, state);
  socket.connect();
}

start();
