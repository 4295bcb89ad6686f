"""Drive a game server by hand on a virtual clock.

Shows the two ways a unit loses health: downtime reported in status
reports (gradual decay), and a capture with the right fingerprint
(instant zero). Also shows the rejections a capture can earn.
"""

from hackmatch.model import GameConfig
from hackmatch.protocol import CaptureSubmission, StatusReport, UnitReport
from hackmatch.server import GameServer


def report(state, name, t, down=()):
    """Status report for all of ``name``'s units, the listed ones down."""
    player = next(p for p in state.players if p.name == name)
    return StatusReport(
        timestamp=t,
        ip=player.host_address,
        player_name=name,
        units=tuple(
            UnitReport(code=400 if u.unit_id in down else 200,
                       id=u.unit_id, health=u.health, port=u.port)
            for u in player.realm.units
        ),
    )


def show(state, label):
    print(f"-- {label}")
    for p in state.players:
        row = "  ".join(f"{u.unit_id[:8]}:{u.health:6.1f}{'' if u.alive else ' DEAD'}"
                        for u in p.realm.units)
        print(f"   {p.name:<6} {row}")


def main() -> None:
    server = GameServer()
    config = GameConfig(damage_constant=2.0, rng_seed=5)
    state = server.create_game(config, ["alice", "bob"], game_id="g-demo")
    for name in ("alice", "bob"):
        server.register_player("g-demo", name)
    server.start_game("g-demo", now=0.0)
    show(server.game("g-demo"), "t=0, match starts, everyone at 100")

    victim = server.game("g-demo").players[1].realm.units[0]
    print(f"\nbob's {victim.unit_id[:8]} goes dark; alice keeps hers healthy\n")

    for t in (5.0, 10.0, 15.0):
        server.handle_status_report("g-demo", report(state, "alice", t), received_at=t)
        server.handle_status_report(
            "g-demo", report(state, "bob", t, down={victim.unit_id}), received_at=t)
        show(server.game("g-demo"), f"t={t:.0f}, decay at {config.damage_constant} hp/s")

    print("\nalice tries three captures:")
    own = server.game("g-demo").players[0].realm.units[0].fingerprint
    attempts = [
        ("her own unit's fingerprint", own),
        ("garbage", "not-a-fingerprint"),
        ("the stolen fingerprint", victim.fingerprint),
    ]
    for label, fp in attempts:
        verdict = server.handle_capture(
            "g-demo",
            CaptureSubmission(attacker="alice", claimed_fingerprint=fp, timestamp=16.0),
            now=16.0)
        print(f"   {label:<28} -> accepted={verdict.accepted}  {verdict.reason}")

    show(server.game("g-demo"), "after the capture")
    final = server.game("g-demo")
    print(f"\nphase={final.phase.value}  winner={final.winner or 'none yet'}")


if __name__ == "__main__":
    main()
