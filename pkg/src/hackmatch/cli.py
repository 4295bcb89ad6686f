"""Operator entry points.

Subcommands:
  gamed     host games: framed-TCP front end, optional websocket bridge
  playerd   run one player's daemon against a remote game server
  botd      run the autonomous player against a remote game server
  simulate  run a fully in-process seeded match and write its transcript
  report    summarize a transcript's metrics, optionally as CSV
"""

import argparse
import logging
import sys
import threading

from .model import DEFAULT_CLASS_POOL, GameConfig, GameMode, load_class_pool


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="RNG seed")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hackmatch",
                                     description="head-to-head hacking match engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gamed", help="run the game server")
    p.add_argument("--bind", default="127.0.0.1:7777", help="host:port for players")
    p.add_argument("--mode", choices=[m.value for m in GameMode], default="objective")
    p.add_argument("--time-limit", type=float, default=None, help="time mode limit, seconds")
    p.add_argument("--clock", type=float, default=None, help="speed mode budget, seconds")
    p.add_argument("--players", default="alice,bob", help="comma-separated roster")
    p.add_argument("--units", type=int, default=3, help="units per player")
    p.add_argument("--health", type=int, default=100, help="starting unit health")
    p.add_argument("--dc", type=float, default=None,
                   help="damage constant (default 1/health)")
    p.add_argument("--report-interval", type=float, default=1.0)
    p.add_argument("--defeat-fraction", type=float, default=1.0)
    p.add_argument("--reshuffle", type=float, default=None,
                   help="reshuffle a random unit every N seconds")
    p.add_argument("--class-pool", default=None, help="JSON class pool file")
    p.add_argument("--game-id", default=None)
    p.add_argument("--ledger", default=None, help="directory for chain files")
    p.add_argument("--decentralized", action="store_true",
                   help="append every transition to the hash-chained ledger")
    p.add_argument("--ws-bind", default=None,
                   help="host:port for the scoreboard websocket bridge")
    p.add_argument("--static-dir", default=None,
                   help="serve these files over the bridge's HTTP side")
    p.add_argument("--auto-start", action="store_true",
                   help="start once the full roster has registered")
    _add_common(p)

    for name, help_text in (("playerd", "run a player daemon"),
                            ("botd", "run the bot player")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--game", required=True, help="game id")
        p.add_argument("--name", required=True, help="player name")
        p.add_argument("--server", required=True, help="game server host:port")
        p.add_argument("--host", default="127.0.0.1",
                       help="address this player's units bind to")
        p.add_argument("--interval", type=float, default=1.0, help="report interval")
        p.add_argument("--flag-dir", default=None)
        if name == "botd":
            p.add_argument("--corpus", default=None, help="phase corpus directory")
            p.add_argument("--alpha", type=float, default=0.1, help="loss penalty rate")
            p.add_argument("--order", type=int, default=4, help="character model order")
            p.add_argument("--sample", action="store_true",
                           help="sample phases/characters instead of argmax")
        _add_common(p)

    p = sub.add_parser("simulate", help="run a seeded in-process match")
    p.add_argument("--mode", choices=[m.value for m in GameMode], default="objective")
    p.add_argument("--scenario", default=None,
                   help="bot | silent | downtime | idle | duel")
    p.add_argument("--out", default=None, help="transcript directory")
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--max-time", type=float, default=None)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--clock", type=float, default=None)
    p.add_argument("--health", type=int, default=100)
    p.add_argument("--dc", type=float, default=1.0)
    p.add_argument("--report-interval", type=float, default=1.0)
    p.add_argument("--defeat-fraction", type=float, default=1.0)
    p.add_argument("--reshuffle", type=float, default=None)
    p.add_argument("--units", type=int, default=3)
    p.add_argument("--corpus", default=None)
    p.add_argument("--decentralized", action="store_true")
    _add_common(p)

    p = sub.add_parser("report", help="summarize a match transcript")
    p.add_argument("transcript", help="transcript directory")
    p.add_argument("--csv", default=None, help="write metrics.csv/timeline.csv here")
    _add_common(p)

    return parser


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


def cmd_gamed(args) -> int:
    from .net import GameNetServer, parse_address
    from .server import GameServer

    try:
        host, port = parse_address(args.bind)
        names = [n.strip() for n in args.players.split(",") if n.strip()]
        pool = load_class_pool(args.class_pool) if args.class_pool else DEFAULT_CLASS_POOL
        config = GameConfig(
            mode=GameMode(args.mode),
            default_health=args.health,
            damage_constant=args.dc if args.dc is not None else 1.0 / args.health,
            report_interval=args.report_interval,
            time_limit=args.time_limit,
            clock_budget=args.clock,
            reshuffle_interval=args.reshuffle,
            defeat_fraction=args.defeat_fraction,
            rng_seed=args.seed,
        )
        server = GameServer(decentralized=args.decentralized, ledger_dir=args.ledger)
        state = server.create_game(config, names, class_pool=pool,
                                   units_per_player=args.units, game_id=args.game_id)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    net = GameNetServer(server, host=host, port=port).start()
    net.start_ticker()
    print(f"game {state.game_id} [{config.mode.value}] listening on {net.address}")

    bridge = None
    if args.ws_bind:
        from .bridge import ScoreboardBridge

        ws_host, ws_port = parse_address(args.ws_bind, default_port=7788)
        bridge = ScoreboardBridge(server, host=ws_host, port=ws_port,
                                  static_dir=args.static_dir).start()
        print(f"scoreboard bridge on http://{bridge.host}:{bridge.port}"
              f" (ws at /ws/game/{state.game_id})")

    stop = threading.Event()
    try:
        if args.auto_start:
            import time as _time

            from .model import GamePhase

            while not stop.is_set():
                rec_state = server.game(state.game_id)
                if rec_state.phase != GamePhase.LOBBY:
                    break
                roster = {p.name for p in rec_state.players}
                if roster <= server._games[state.game_id].registered:
                    server.start_game(state.game_id)
                    print("all players registered; game started")
                    break
                _time.sleep(0.2)
        stop.wait()
    except KeyboardInterrupt:
        pass
    finally:
        if bridge is not None:
            bridge.stop()
        net.stop()
    return 0


def _run_player(args, with_bot: bool) -> int:
    import random
    import time

    from .bot import Bot, default_phase_models, load_phase_models
    from .net import GameClient, parse_address
    from .player import PlayerDaemon
    from .protocol import ScoreUpdate

    host, port = parse_address(args.server)
    try:
        client = GameClient(host, port)
    except OSError as exc:
        print(f"error: cannot reach {args.server}: {exc}", file=sys.stderr)
        return 2
    daemon = PlayerDaemon(client, args.game, args.name, host=args.host,
                          flag_dir=args.flag_dir, host_units=True)
    try:
        daemon.register()
    except (RuntimeError, TimeoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        client.close()
        return 2
    print(f"{args.name} registered; opponent is {daemon.opponent};"
          f" hosting {len(daemon.units)} unit(s)")

    bot = None
    if with_bot:
        models = (load_phase_models(args.corpus, k=args.order) if args.corpus
                  else default_phase_models(k=args.order))
        bot = Bot(daemon, models, rng=random.Random(args.seed or 0),
                  alpha=args.alpha, sample=args.sample)

    stop = threading.Event()
    try:
        while not stop.is_set():
            try:
                daemon.report_once()
            except Exception as exc:  # server restarts, lobby phase, etc.
                logging.getLogger("hackmatch.cli").debug("report skipped: %s", exc)
            while True:
                update = client.poll_update()
                if update is None:
                    break
                if isinstance(update, ScoreUpdate):
                    daemon.observe_score(update)
            if bot is not None:
                try:
                    bot.step(time.time())
                except Exception as exc:
                    logging.getLogger("hackmatch.cli").debug("bot step skipped: %s", exc)
            stop.wait(args.interval)
    except KeyboardInterrupt:
        pass
    finally:
        daemon.shutdown()
        client.close()
    return 0


def cmd_simulate(args) -> int:
    from .sim import simulate

    try:
        result = simulate(
            mode=args.mode,
            seed=args.seed if args.seed is not None else 0,
            scenario=args.scenario,
            out_dir=args.out,
            default_health=args.health,
            damage_constant=args.dc,
            report_interval=args.report_interval,
            time_limit=args.time_limit,
            clock_budget=args.clock,
            defeat_fraction=args.defeat_fraction,
            reshuffle_interval=args.reshuffle,
            units_per_player=args.units,
            decentralized=args.decentralized,
            step=args.step,
            max_time=args.max_time,
            corpus_dir=args.corpus,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outcome = "draw" if result.draw else (result.winner or "no result")
    print(f"game {result.game_id} finished at t={result.finished_at:.1f}s: {outcome}")
    if result.out_dir:
        print(f"transcript written to {result.out_dir}")
    return 0


def cmd_report(args) -> int:
    from .protocol import DecodeError
    from .sim import format_report, report

    try:
        result = report(args.transcript, csv_dir=args.csv)
    except (DecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(format_report(result))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)
    if args.command == "gamed":
        return cmd_gamed(args)
    if args.command == "playerd":
        return _run_player(args, with_bot=False)
    if args.command == "botd":
        return _run_player(args, with_bot=True)
    if args.command == "simulate":
        return cmd_simulate(args)
    return cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
