"""Run one seeded bot-vs-bot match in process and narrate it from the event feed."""

from hackmatch.sim import simulate


def main() -> None:
    result = simulate("objective", seed=7)

    print(f"game {result.game_id}: objective mode, two scripted attackers")
    print(f"players: {', '.join(p.name for p in result.state.players)}")
    print()

    for ev in result.events:
        if ev.kind == "capture":
            print(f"  t={ev.timestamp:6.1f}  {ev.data['attacker']} captures "
                  f"{ev.data['unit']} (owned by {ev.player})")
        elif ev.kind == "winner":
            who = ev.data["winner"] or "nobody"
            print(f"  t={ev.timestamp:6.1f}  match over: {who} wins "
                  f"({ev.data.get('reason', '?')})")

    print()
    print("final board:")
    for player in result.state.players:
        total = sum(u.health for u in player.realm.units)
        marks = " ".join(
            f"{u.unit_id}={u.health:.0f}" + ("" if u.alive else "(dead)")
            for u in player.realm.units
        )
        print(f"  {player.name:<8} total {total:6.1f}   {marks}")

    sample = [c for c in result.commands if c.kind.value == "command"][:5]
    if sample:
        print()
        print("a few commands the bots typed:")
        for c in sample:
            print(f"  [{c.player}] {c.text}")


if __name__ == "__main__":
    main()
