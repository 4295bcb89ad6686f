"""Game server core: the single source of truth for every match it hosts.

All mutations to one game run under that game's lock, so readers always see
a consistent immutable snapshot and concurrent games never interfere. Every
operation takes an explicit ``now`` so simulations can drive a virtual clock;
live callers pass wall time (or nothing, which means time.time()).

Damage accounting uses server receive times, never client timestamps: a
report charges each probed-down unit for the span since the server last
accounted for that player. Client timestamps exist only to deduplicate
retransmitted reports. Players that stop reporting entirely are charged for
the whole silent span once it exceeds the stale threshold, so an unreachable
daemon loses the same way a dead service does.
"""

import logging
import random
import threading
import time
from dataclasses import dataclass, field, replace

from . import ledger as ledger_mod
from . import metrics as metrics_mod
from .bus import InProcessBus
from .health import DownSet, alive_count, apply_tick, destroyed_fraction, health_sum
from .model import (
    GameConfig,
    GameMode,
    GamePhase,
    GameState,
    find_player,
    find_unit,
    new_game,
    replace_unit,
    reshuffle_unit,
    with_health,
)
from .protocol import (
    CaptureSubmission,
    CaptureVerdict,
    GameEvent,
    OpponentInfo,
    RealmInfo,
    Registered,
    ScoreUpdate,
    StatusReport,
    topic_for,
)
from .model import is_well_formed_fingerprint

log = logging.getLogger("hackmatch.server")

EPS = 1e-12


class MatchClock:
    """Mode-aware match timer. Mutable; the owning game's lock guards it.

    Tracks active (unpaused) elapsed time. In speed mode each player has a
    countdown budget and exactly one player's clock runs at a time.
    """

    def __init__(self, mode: GameMode, time_limit=None, budget=None):
        self.mode = mode
        self.time_limit = time_limit
        self.budget = budget
        self.elapsed = 0.0
        self.remaining: dict[str, float] = {}
        self.active_player: str | None = None
        self.paused = False
        self._stamp: float | None = None

    def start(self, now: float, players) -> None:
        self._stamp = now
        if self.mode == GameMode.SPEED:
            if self.budget is None:
                raise ValueError("speed mode requires a clock budget")
            self.remaining = {name: float(self.budget) for name in players}
            self.active_player = players[0]

    def advance(self, now: float) -> None:
        if self.paused or self._stamp is None:
            return
        dt = max(0.0, now - self._stamp)
        self._stamp = now
        self.elapsed += dt
        if self.mode == GameMode.SPEED and self.active_player is not None:
            self.remaining[self.active_player] -= dt

    def press(self, presser: str, next_active: str, now: float) -> None:
        self.advance(now)
        if presser != self.active_player:
            raise ValueError(f"{presser} is not the active player")
        self.active_player = next_active

    def pause(self, now: float) -> None:
        self.advance(now)
        self.paused = True

    def resume(self, now: float) -> None:
        self._stamp = now
        self.paused = False

    def stop(self, now: float) -> None:
        self.advance(now)
        self.paused = True
        self.active_player = None

    def expired(self) -> bool:
        return (
            self.mode == GameMode.TIME
            and self.time_limit is not None
            and self.elapsed >= self.time_limit - EPS
        )

    def exhausted(self) -> list[str]:
        if self.mode != GameMode.SPEED:
            return []
        return sorted(name for name, left in self.remaining.items() if left <= EPS)

    def view(self) -> dict:
        out = {"mode": self.mode.value, "elapsed": self.elapsed, "paused": self.paused}
        if self.mode == GameMode.TIME:
            out["time_limit"] = self.time_limit
        if self.mode == GameMode.SPEED:
            out["remaining"] = {n: max(0.0, v) for n, v in self.remaining.items()}
            out["active_player"] = self.active_player
        return out


@dataclass
class _GameRecord:
    state: GameState
    clock: MatchClock
    lock: threading.RLock = field(default_factory=threading.RLock)
    registered: set = field(default_factory=set)
    last_seen: dict = field(default_factory=dict)       # player -> wall time of last report
    accounted_until: dict = field(default_factory=dict)  # player -> time decay is settled to
    seen_reports: set = field(default_factory=set)       # (playerName, timestamp) dedup keys
    command_log: list = field(default_factory=list)
    last_command_at: dict = field(default_factory=dict)
    seq: int = 0
    pause_started: float | None = None
    next_reshuffle: float | None = None
    rng: random.Random = field(default_factory=random.Random)
    chain: list = field(default_factory=list)
    draw: bool = False


class GameServer:
    """Hosts any number of independent games over one bus."""

    def __init__(
        self,
        bus: InProcessBus | None = None,
        stale_factor: float = 2.0,
        decentralized: bool = False,
        ledger_dir=None,
        difficulty_bits: int = 0,
    ):
        self.bus = bus if bus is not None else InProcessBus()
        self.stale_factor = stale_factor
        self.decentralized = decentralized
        self.ledger_dir = ledger_dir
        self.difficulty_bits = difficulty_bits
        self._games: dict[str, _GameRecord] = {}
        self._lock = threading.Lock()

    # -- setup ----------------------------------------------------------------

    def create_game(
        self,
        config: GameConfig,
        player_names,
        class_pool=None,
        units_per_player: int = 3,
        host_addresses=None,
        game_id: str | None = None,
    ) -> GameState:
        state = new_game(
            config,
            player_names,
            class_pool=class_pool,
            units_per_player=units_per_player,
            host_addresses=host_addresses,
            game_id=game_id,
        )
        clock = MatchClock(config.mode, time_limit=config.time_limit, budget=config.clock_budget)
        rng = random.Random(None if config.rng_seed is None else config.rng_seed + 1000003)
        rec = _GameRecord(state=state, clock=clock, rng=rng)
        with self._lock:
            if state.game_id in self._games:
                raise ValueError(f"game {state.game_id!r} already exists")
            self._games[state.game_id] = rec
        log.info("created game %s mode=%s players=%s", state.game_id, config.mode.value,
                 ",".join(p.name for p in state.players))
        return state

    def _rec(self, game_id: str) -> _GameRecord:
        with self._lock:
            try:
                return self._games[game_id]
            except KeyError:
                raise KeyError(f"unknown game {game_id!r}") from None

    def game(self, game_id: str) -> GameState:
        return self._rec(game_id).state

    def game_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._games)

    # -- events and scoring -----------------------------------------------------

    def _emit(self, rec: _GameRecord, now: float, kind: str, player: str = "", data=None):
        rec.seq += 1
        event = GameEvent(
            game_id=rec.state.game_id,
            seq=rec.seq,
            tick=rec.state.tick,
            timestamp=now,
            kind=kind,
            player=player,
            data=data or {},
        )
        # game-scoped events fan out to every player's feed; consumers
        # deduplicate on seq
        targets = [player] if player else [p.name for p in rec.state.players]
        for name in targets:
            self.bus.publish(topic_for(rec.state.game_id, name, "events"), event)
        return event

    def score_update(self, game_id: str, now: float | None = None) -> ScoreUpdate:
        rec = self._rec(game_id)
        with rec.lock:
            return self._build_score(rec, time.time() if now is None else now)

    def _build_score(self, rec: _GameRecord, now: float) -> ScoreUpdate:
        state = rec.state
        players = {}
        for p in state.players:
            started = state.started_at
            snap = metrics_mod.snapshot(
                [e for e in rec.command_log if e.player == p.name],
                p.name,
                now,
                started if started is not None else now,
            )
            players[p.name] = {
                "health_sum": health_sum(state, p.name),
                "alive": alive_count(state, p.name),
                "destroyed_fraction": destroyed_fraction(state, p.name),
                "opponent": p.opponent,
                "units": [
                    {
                        "id": u.unit_id,
                        "class_id": u.class_id,
                        "port": u.port,
                        "health": u.health,
                        "code": u.status_code,
                        "alive": u.alive,
                    }
                    for u in p.realm.units
                ],
                "metrics": snap.as_dict(),
            }
        return ScoreUpdate(
            game_id=state.game_id,
            timestamp=now,
            tick=state.tick,
            phase=state.phase.value,
            winner=state.winner,
            draw=rec.draw,
            # finished games freeze the clock through the same flag; only a
            # running game counts as operator-paused
            paused=rec.clock.paused and state.phase == GamePhase.RUNNING,
            players=players,
            clock=rec.clock.view(),
        )

    def _publish_score(self, rec: _GameRecord, now: float) -> None:
        update = self._build_score(rec, now)
        for p in rec.state.players:
            self.bus.publish(topic_for(rec.state.game_id, p.name, "score"), update)

    def _append_ledger(self, rec: _GameRecord, now: float, player: str, kind: str, extra=None):
        if not self.decentralized:
            return
        state = rec.state
        host = ""
        units = []
        if player:
            p = find_player(state, player)
            host = p.host_address
            units = [
                {"code": u.status_code, "id": u.unit_id, "health": u.health, "port": u.port}
                for u in p.realm.units
            ]
        cmds = {"kind": kind}
        cmds.update(extra or {})
        payload = {
            "timestamp": now,
            "ip": host,
            "playerName": player,
            "cmds": cmds,
            "units": units,
        }
        if rec.chain:
            block = ledger_mod.make_block(rec.chain[-1], payload, self.difficulty_bits)
        else:
            block = ledger_mod.make_genesis(payload, self.difficulty_bits)
        rec.chain.append(block)
        if self.ledger_dir is not None:
            path = f"{self.ledger_dir}/{state.game_id}.chain"
            ledger_mod.append_block(path, block)

    def chain(self, game_id: str) -> list:
        rec = self._rec(game_id)
        with rec.lock:
            return list(rec.chain)

    # -- lobby ops ---------------------------------------------------------------

    def register_player(self, game_id: str, name: str, host: str = "127.0.0.1",
                        now: float | None = None) -> Registered:
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            try:
                player = find_player(rec.state, name)
            except KeyError:
                log.warning("game %s: register for unknown player %r", game_id, name)
                return Registered(game_id=game_id, player=name, ok=False,
                                  reason="unknown player")
            if player.host_address != host:
                player = replace(player, host_address=host)
                rec.state = _swap_player(rec.state, player)
                # the opponent's daemon learns the fresh address on its own channel
                self.bus.publish(
                    topic_for(game_id, player.opponent, "opponent"),
                    OpponentInfo(game_id=game_id, player=player.opponent,
                                 opponent=name, host=host),
                )
            rec.registered.add(name)
            self._emit(rec, now, "registered", player=name, data={"host": host})
            return Registered(game_id=game_id, player=name, ok=True, opponent=player.opponent)

    def start_game(self, game_id: str, now: float | None = None) -> GameState:
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            state = rec.state
            if state.phase != GamePhase.LOBBY:
                raise ValueError(f"game is {state.phase.value}, not lobby")
            missing = [p.name for p in state.players if p.name not in rec.registered]
            if missing:
                raise ValueError(f"players not registered: {', '.join(missing)}")
            names = [p.name for p in state.players]
            rec.state = replace(state, phase=GamePhase.RUNNING, started_at=now)
            rec.clock.start(now, names)
            for name in names:
                rec.last_seen[name] = now
                rec.accounted_until[name] = now
            if rec.state.config.reshuffle_interval:
                rec.next_reshuffle = rec.state.config.reshuffle_interval
            self._emit(rec, now, "phase", data={"phase": "running"})
            self._append_ledger(rec, now, "", "start")
            self._publish_score(rec, now)
            return rec.state

    def pause_game(self, game_id: str, now: float | None = None) -> GameState:
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            if rec.state.phase != GamePhase.RUNNING:
                raise ValueError("game is not running")
            if not rec.clock.paused:
                rec.clock.pause(now)
                rec.pause_started = now
                self._emit(rec, now, "phase", data={"phase": "paused"})
                self._publish_score(rec, now)
            return rec.state

    def resume_game(self, game_id: str, now: float | None = None) -> GameState:
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            if rec.state.phase != GamePhase.RUNNING:
                raise ValueError("game is not running")
            if rec.clock.paused:
                # paused wall time never counts as downtime
                gap = max(0.0, now - (rec.pause_started if rec.pause_started else now))
                for name in rec.last_seen:
                    rec.last_seen[name] += gap
                    rec.accounted_until[name] += gap
                rec.pause_started = None
                rec.clock.resume(now)
                self._emit(rec, now, "phase", data={"phase": "running"})
                self._publish_score(rec, now)
            return rec.state

    # -- report ingestion ----------------------------------------------------------

    def handle_status_report(self, game_id: str, report: StatusReport,
                             received_at: float | None = None) -> GameState:
        received_at = time.time() if received_at is None else received_at
        rec = self._rec(game_id)
        with rec.lock:
            state = rec.state
            if state.phase != GamePhase.RUNNING:
                raise ValueError(f"game is {state.phase.value}, not running")
            name = report.player_name
            try:
                player = find_player(state, name)
            except KeyError:
                log.warning("game %s: report from unknown player %r", game_id, name)
                raise
            own_ids = {u.unit_id for u in player.realm.units}
            strange = [e.id for e in report.units if e.id not in own_ids]
            if strange:
                log.warning("game %s: report from %s names unknown units %s",
                            game_id, name, strange)
                raise KeyError(f"unknown units in report: {', '.join(strange)}")

            dedup_key = (name, report.timestamp)
            if dedup_key in rec.seen_reports:
                return state  # replayed report: no double damage
            rec.seen_reports.add(dedup_key)

            if rec.clock.paused:
                return state  # decay frozen; accounting resumes after the pause

            # a unit the daemon omits is charged as down: silence is not liveness
            codes = {e.id: e.code for e in report.units}
            down_ids = frozenset(
                u.unit_id
                for u in player.realm.units
                if u.alive and codes.get(u.unit_id, 400) == 400
            )
            dt = max(0.0, received_at - rec.accounted_until.get(name, received_at))
            rec.accounted_until[name] = received_at
            rec.last_seen[name] = received_at

            state = self._apply_down(rec, state, down_ids, dt, received_at, name)

            # refresh probe codes on live up units
            for u in find_player(state, name).realm.units:
                code = codes.get(u.unit_id)
                if code == 200 and u.alive and u.status_code != 200:
                    state = replace_unit(state, with_health(u, u.health, status_code=200))
            rec.state = state
            self._append_ledger(rec, received_at, name, "status_report",
                                {"t": report.timestamp})
            self._evaluate_win(rec, received_at)
            self._publish_score(rec, received_at)
            return rec.state

    def _apply_down(self, rec: _GameRecord, state: GameState, down_ids, dt: float,
                    now: float, player: str) -> GameState:
        """Charge downtime to the named units. Returns the new state; emits a
        health event per changed unit."""
        if not down_ids:
            return state
        before = {uid: find_unit(state, uid).health for uid in down_ids}
        if state.config.default_health == 1:
            # sudden death: one bad probe destroys the unit outright
            for uid in down_ids:
                unit = find_unit(state, uid)
                if unit.alive:
                    state = replace_unit(state, with_health(unit, 0.0, status_code=400))
            state = replace(state, tick=state.tick + 1)
        elif dt > 0:
            state = apply_tick(state, DownSet(tick=state.tick, unit_ids=down_ids), dt)
        else:
            for uid in down_ids:
                unit = find_unit(state, uid)
                if unit.status_code != 400:
                    state = replace_unit(state, with_health(unit, unit.health, status_code=400))
        rec.state = state
        for uid in sorted(down_ids):
            unit = find_unit(state, uid)
            if unit.health != before[uid]:
                self._emit(rec, now, "health", player=player,
                           data={"unit": uid, "health": unit.health, "alive": unit.alive})
        return state

    # -- captures --------------------------------------------------------------------

    def handle_capture(self, game_id: str, sub: CaptureSubmission,
                       now: float | None = None) -> CaptureVerdict:
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            state = rec.state

            def reject(reason: str) -> CaptureVerdict:
                log.info("game %s: capture by %s rejected: %s", game_id, sub.attacker, reason)
                return CaptureVerdict(attacker=sub.attacker, accepted=False, reason=reason)

            if state.phase != GamePhase.RUNNING:
                return reject("game is not running")
            if rec.clock.paused:
                return reject("game is paused")
            try:
                attacker = find_player(state, sub.attacker)
            except KeyError:
                return reject("unknown attacker")
            claimed = sub.claimed_fingerprint
            if not is_well_formed_fingerprint(claimed):
                return reject("malformed fingerprint")
            if any(u.fingerprint == claimed for u in attacker.realm.units):
                return reject("own fingerprint")

            opponent = find_player(state, attacker.opponent)
            target = next((u for u in opponent.realm.units if u.fingerprint == claimed), None)
            if target is None:
                return reject("no matching unit")
            if not target.alive:
                return reject("unit already destroyed")

            # instant destruction: the swap below is atomic under the game lock
            state = replace_unit(state, with_health(target, 0.0, status_code=400))
            state = replace(state, tick=state.tick + 1)
            rec.state = state
            self._emit(rec, now, "capture", player=opponent.name,
                       data={"unit": target.unit_id, "attacker": sub.attacker})
            self._emit(rec, now, "health", player=opponent.name,
                       data={"unit": target.unit_id, "health": 0.0, "alive": False})
            self._append_ledger(rec, now, sub.attacker, "capture",
                                {"unit": target.unit_id})
            self._evaluate_win(rec, now)
            self._publish_score(rec, now)
            return CaptureVerdict(attacker=sub.attacker, accepted=True,
                                  unit_id=target.unit_id, reason="proof accepted")

    # -- command stream ------------------------------------------------------------------

    def handle_command_event(self, game_id: str, event: metrics_mod.CommandEvent,
                             now: float | None = None) -> None:
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            find_player(rec.state, event.player)  # unknown player -> KeyError
            last = rec.last_command_at.get(event.player)
            if last is not None and event.timestamp < last:
                raise ValueError(
                    f"command timestamps must be non-decreasing per player "
                    f"({event.timestamp} < {last})"
                )
            rec.last_command_at[event.player] = event.timestamp
            rec.command_log.append(event)
            if event.kind == metrics_mod.EventKind.COMMAND:
                self._emit(rec, now, "command", player=event.player,
                           data={"text": event.text, "valid": event.valid})
                # a valid submission is a move: in speed mode it presses the clock
                if (
                    event.valid
                    and rec.state.phase == GamePhase.RUNNING
                    and not rec.clock.paused
                    and rec.state.config.mode == GameMode.SPEED
                    and rec.clock.active_player == event.player
                ):
                    self._press(rec, event.player, now)

    def clock_press(self, game_id: str, player: str, now: float | None = None) -> GameState:
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            if rec.state.config.mode != GameMode.SPEED:
                raise ValueError("clock press only applies to speed mode")
            if rec.state.phase != GamePhase.RUNNING:
                raise ValueError("game is not running")
            if rec.clock.paused:
                raise ValueError("game is paused")
            find_player(rec.state, player)
            self._press(rec, player, now)
            return rec.state

    def _press(self, rec: _GameRecord, player: str, now: float) -> None:
        opponent = find_player(rec.state, player).opponent
        rec.clock.press(player, opponent, now)  # raises if player is not active
        if rec.clock.exhausted():
            self._evaluate_win(rec, now)
        else:
            self._emit(rec, now, "clock", data={"active_player": rec.clock.active_player})
        self._publish_score(rec, now)

    # -- time & victory ---------------------------------------------------------------------

    def advance_time(self, game_id: str, now: float | None = None) -> GameState:
        """Periodic sweep: move clocks, charge silent players, reshuffle,
        check victory. Drive this from a timer (live) or per step (simulated)."""
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            state = rec.state
            if state.phase != GamePhase.RUNNING or rec.clock.paused:
                return state
            rec.clock.advance(now)
            threshold = self.stale_factor * state.config.report_interval
            for p in state.players:
                seen = rec.last_seen.get(p.name, now)
                if now - seen > threshold:
                    dt = now - rec.accounted_until.get(p.name, seen)
                    alive = frozenset(u.unit_id for u in p.realm.units if u.alive)
                    if dt > 0 and alive:
                        state = self._apply_down(rec, state, alive, dt, now, p.name)
                        rec.accounted_until[p.name] = now
            rec.state = state
            self._maybe_reshuffle(rec, now)
            self._evaluate_win(rec, now)
            self._publish_score(rec, now)
            return rec.state

    def _maybe_reshuffle(self, rec: _GameRecord, now: float) -> None:
        interval = rec.state.config.reshuffle_interval
        if not interval or rec.next_reshuffle is None:
            return
        while rec.clock.elapsed >= rec.next_reshuffle - EPS:
            rec.next_reshuffle += interval
            for p in rec.state.players:
                live = [u for u in p.realm.units if u.alive]
                if not live:
                    continue
                pick = rec.rng.choice(sorted(u.unit_id for u in live))
                old = find_unit(rec.state, pick)
                rec.state = reshuffle_unit(rec.state, p.name, pick, rec.rng)
                fresh = [u for u in find_player(rec.state, p.name).realm.units
                         if u.unit_id not in {x.unit_id for x in p.realm.units}]
                self._emit(rec, now, "reshuffle", player=p.name,
                           data={"old_unit": old.unit_id,
                                 "new_unit": fresh[0].unit_id if fresh else "",
                                 "port": fresh[0].port if fresh else 0})

    def evaluate_win(self, game_id: str, now: float | None = None) -> str | None:
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            self._evaluate_win(rec, now)
            return rec.state.winner

    def _evaluate_win(self, rec: _GameRecord, now: float) -> None:
        state = rec.state
        if state.phase != GamePhase.RUNNING:
            return
        cfg = state.config
        names = [p.name for p in state.players]

        if cfg.mode == GameMode.OBJECTIVE:
            beaten = [n for n in names
                      if destroyed_fraction(state, n) >= cfg.defeat_fraction - EPS]
            if not beaten:
                return
            standing = [n for n in names if n not in beaten]
            if len(standing) == 1:
                self._finish(rec, now, winner=standing[0], reason="last hacker alive")
            elif not standing:
                self._finish(rec, now, winner=None, reason="mutual destruction")
            return

        if cfg.mode == GameMode.TIME:
            if not rec.clock.expired():
                return
            sums = {n: health_sum(state, n) for n in names}
            best = max(sums.values())
            leaders = sorted(n for n in names if abs(sums[n] - best) <= EPS)
            if len(leaders) == 1:
                self._finish(rec, now, winner=leaders[0], reason="highest total health")
                return
            alive = {n: alive_count(state, n) for n in leaders}
            most = max(alive.values())
            standing = sorted(n for n in leaders if alive[n] == most)
            if len(standing) == 1:
                self._finish(rec, now, winner=standing[0], reason="most units alive")
            else:
                self._finish(rec, now, winner=None, reason="dead even at expiry")
            return

        if cfg.mode == GameMode.SPEED:
            rec.clock.advance(now)
            out = rec.clock.exhausted()
            if not out:
                return
            standing = [n for n in names if n not in out]
            if len(standing) == 1:
                self._finish(rec, now, winner=standing[0], reason="opponent clock exhausted")
            else:
                self._finish(rec, now, winner=None, reason="all clocks exhausted")

    def _finish(self, rec: _GameRecord, now: float, winner: str | None, reason: str) -> None:
        rec.clock.stop(now)
        rec.draw = winner is None
        rec.state = replace(rec.state, phase=GamePhase.FINISHED, winner=winner)
        log.info("game %s finished: %s (%s)", rec.state.game_id,
                 winner if winner else "draw", reason)
        self._emit(rec, now, "winner",
                   data={"winner": winner, "draw": rec.draw, "reason": reason})
        self._append_ledger(rec, now, winner or "", "winner", {"reason": reason})
        self._publish_score(rec, now)

    # -- queries -------------------------------------------------------------------------------

    def opponent_info(self, game_id: str, player: str) -> OpponentInfo:
        rec = self._rec(game_id)
        with rec.lock:
            me = find_player(rec.state, player)
            opp = find_player(rec.state, me.opponent)
            return OpponentInfo(game_id=game_id, player=player,
                                opponent=opp.name, host=opp.host_address)

    def realm_info(self, game_id: str, player: str) -> RealmInfo:
        """The caller's own units with their secrets. Callers that remote this
        must bind it to an authenticated connection for the named player."""
        rec = self._rec(game_id)
        with rec.lock:
            me = find_player(rec.state, player)
            keys = {c.class_id: c.vuln_key for c in rec.state.class_pool}
            units = tuple(
                {
                    "id": u.unit_id,
                    "port": u.port,
                    "class_id": u.class_id,
                    "fingerprint": u.fingerprint,
                    "vuln_key": keys.get(u.class_id, ""),
                    "health": u.health,
                }
                for u in me.realm.units
            )
            return RealmInfo(game_id=game_id, player=player, units=units)

    def command_log(self, game_id: str, player: str | None = None) -> list:
        rec = self._rec(game_id)
        with rec.lock:
            if player is None:
                return list(rec.command_log)
            return [e for e in rec.command_log if e.player == player]

    def metrics_snapshot(self, game_id: str, player: str,
                         now: float | None = None) -> metrics_mod.MetricsSnapshot:
        now = time.time() if now is None else now
        rec = self._rec(game_id)
        with rec.lock:
            find_player(rec.state, player)
            started = rec.state.started_at
            return metrics_mod.snapshot(rec.command_log, player, now,
                                        started if started is not None else now)


def _swap_player(state: GameState, player) -> GameState:
    players = tuple(player if p.name == player.name else p for p in state.players)
    return replace(state, players=players)
