"""Speed mode: a shared chess clock decides the match.

Each player gets a time budget. Pressing the clock hands the turn (and
the ticking) to the opponent; whoever's budget hits zero first loses.
"""

from hackmatch.model import GameConfig, GameMode
from hackmatch.server import GameServer


def clockline(server, t):
    view = server.score_update("g-speed", now=t).clock
    rem = view.get("remaining", {})
    return (f"t={t:4.1f}  active={view.get('active_player') or '-':<6}"
            f" alice={rem.get('alice', 0.0):5.2f}s  bob={rem.get('bob', 0.0):5.2f}s")


def main() -> None:
    server = GameServer()
    config = GameConfig(mode=GameMode.SPEED, clock_budget=10.0, rng_seed=3)
    server.create_game(config, ["alice", "bob"], game_id="g-speed")
    for name in ("alice", "bob"):
        server.register_player("g-speed", name)
    sub = server.bus.subscribe("game/g-speed/player/alice/events")
    server.start_game("g-speed", now=0.0)

    print("budgets: 10 s each, alice's clock runs first\n")
    print(clockline(server, 0.0))

    # alice answers fast, bob thinks too long
    moves = [("alice", 2.0), ("bob", 5.0), ("alice", 6.0), ("bob", 14.0)]
    for player, t in moves:
        try:
            server.clock_press("g-speed", player, now=t)
        except ValueError as exc:
            print(f"t={t:4.1f}  {player} presses: rejected ({exc})")
            continue
        print(clockline(server, t) + f"   <- {player} pressed")

    state = server.game("g-speed")
    winner = [msg for _, msg in sub.drain() if msg.kind == "winner"][-1]
    print(f"\nphase={state.phase.value}  winner={state.winner}"
          f"  ({winner.data['reason']})")


if __name__ == "__main__":
    main()
