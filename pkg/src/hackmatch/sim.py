"""Deterministic in-process matches on a virtual clock.

Nothing here touches wall time or real sockets: services are virtual,
messages ride the in-process bus, and every timestamp comes from the
simulation's own clock. Given the same configuration and seed, the written
transcript is byte-identical across runs, which is what makes replay
debugging and the acceptance suite possible.

A transcript directory holds:
  meta.json        one canonical-JSON object: ids, seed, outcome, timing
  events.ndjson    every feed event, deduplicated by seq, in seq order
  commands.ndjson  the captured command/keystroke stream
  score.json       the final scoreboard snapshot
  <game>.chain     framed ledger blocks, when the decentralized flag is on
"""

import csv
import os
from dataclasses import dataclass, field

from . import metrics as metrics_mod
from .bot import Bot, default_phase_models, load_phase_models
from .bus import InProcessBus
from .metrics import CommandEvent
from .model import GameConfig, GameMode, GamePhase
from .player import PlayerDaemon, VirtualSurface
from .protocol import DecodeError, GameEvent, ScoreUpdate, canonical_decode, canonical_dumps
from .server import GameServer

SCENARIOS = ("bot", "silent", "idle", "duel", "downtime")


@dataclass
class ScriptedPlayer:
    """Behavior knobs for a non-bot participant."""

    name: str
    silent_after: float | None = None      # stop reporting at this time (None: never)
    down_at: dict = field(default_factory=dict)   # unit index -> time service drops
    press_period: float | None = None      # speed mode: press cadence while active
    commands: tuple = ()                   # (time, text) scripted submissions


@dataclass
class SimResult:
    game_id: str
    winner: str | None
    draw: bool
    finished_at: float
    state: object
    score: ScoreUpdate
    events: list
    commands: list
    chain: list
    out_dir: str | None


class Simulation:
    """One seeded match. Add actors, then run()."""

    def __init__(self, config: GameConfig, names=("alice", "bob"),
                 units_per_player: int = 3, decentralized: bool = False,
                 out_dir: str | None = None):
        if config.rng_seed is None:
            raise ValueError("simulations must be seeded")
        self.out_dir = out_dir
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
        self.bus = InProcessBus()
        self.server = GameServer(
            bus=self.bus,
            decentralized=decentralized,
            ledger_dir=out_dir if (decentralized and out_dir) else None,
        )
        self.surface = VirtualSurface()
        hosts = {name: f"10.0.0.{i + 1}" for i, name in enumerate(names)}
        self.state = self.server.create_game(
            config, list(names), units_per_player=units_per_player, host_addresses=hosts
        )
        self.game_id = self.state.game_id
        self.config = config
        self.daemons: dict[str, PlayerDaemon] = {}
        self.services: dict[str, list] = {}
        self._actors = []
        self._events = self.bus.subscribe(f"game/{self.game_id}/player/+/events")
        self.now = 0.0

    # -- wiring ------------------------------------------------------------

    def _daemon(self, name: str) -> PlayerDaemon:
        host = next(p.host_address for p in self.state.players if p.name == name)
        daemon = PlayerDaemon(
            self.server, self.game_id, name,
            surface=self.surface, host=host, host_units=False,
            clock=lambda: self.now,
        )
        daemon.register()
        self.services[name] = [
            self.surface.add(host, u["port"], u["fingerprint"], u["vuln_key"])
            for u in daemon.realm
        ]
        self.daemons[name] = daemon
        return daemon

    def add_scripted(self, spec: ScriptedPlayer) -> PlayerDaemon:
        daemon = self._daemon(spec.name)
        self._actors.append(_ScriptedActor(self, daemon, spec))
        return daemon

    def add_bot(self, name: str, corpus_dir=None, order: int = 4,
                alpha: float = 0.1, sample: bool = False,
                act_period: float | None = None) -> Bot:
        import random

        daemon = self._daemon(name)
        models = (load_phase_models(corpus_dir, k=order) if corpus_dir
                  else default_phase_models(k=order))
        seed = self.config.rng_seed + sum(ord(c) for c in name)
        bot = Bot(daemon, models, rng=random.Random(seed), alpha=alpha, sample=sample)
        self._actors.append(_BotActor(self, daemon, bot, act_period))
        return bot

    # -- running -----------------------------------------------------------

    def run(self, max_time: float = 300.0, step: float = 1.0) -> SimResult:
        self.server.start_game(self.game_id, now=0.0)
        self.now = 0.0
        while True:
            for actor in self._actors:
                actor.on_step(self.now)
                if self.server.game(self.game_id).phase == GamePhase.FINISHED:
                    break
            state = self.server.advance_time(self.game_id, now=self.now)
            if state.phase == GamePhase.FINISHED or self.now >= max_time:
                break
            self.now += step
        return self._finish()

    def _finish(self) -> SimResult:
        state = self.server.game(self.game_id)
        score = self.server.score_update(self.game_id, now=self.now)
        seen = set()
        events = []
        for _topic, msg in self._events.drain():
            if isinstance(msg, GameEvent) and msg.seq not in seen:
                seen.add(msg.seq)
                events.append(msg)
        events.sort(key=lambda e: e.seq)
        commands = self.server.command_log(self.game_id)
        chain = self.server.chain(self.game_id)
        result = SimResult(
            game_id=self.game_id,
            winner=state.winner,
            draw=score.draw,
            finished_at=self.now,
            state=state,
            score=score,
            events=events,
            commands=commands,
            chain=chain,
            out_dir=self.out_dir,
        )
        if self.out_dir is not None:
            self._write_transcript(result)
        return result

    def _write_transcript(self, result: SimResult) -> None:
        out = self.out_dir
        meta = {
            "game_id": result.game_id,
            "mode": self.config.mode.value,
            "seed": self.config.rng_seed,
            "players": sorted(self.daemons),
            "started_at": 0.0,
            "finished_at": result.finished_at,
            "winner": result.winner,
            "draw": result.draw,
        }
        with open(os.path.join(out, "meta.json"), "w", encoding="ascii") as fh:
            fh.write(canonical_dumps(meta) + "\n")
        with open(os.path.join(out, "events.ndjson"), "w", encoding="ascii") as fh:
            for event in result.events:
                fh.write(canonical_dumps(event.to_payload()) + "\n")
        with open(os.path.join(out, "commands.ndjson"), "w", encoding="ascii") as fh:
            for event in result.commands:
                fh.write(canonical_dumps(event.to_payload()) + "\n")
        with open(os.path.join(out, "score.json"), "w", encoding="ascii") as fh:
            fh.write(canonical_dumps(result.score.to_payload()) + "\n")


class _ScriptedActor:
    def __init__(self, sim: Simulation, daemon: PlayerDaemon, spec: ScriptedPlayer):
        self.sim = sim
        self.daemon = daemon
        self.spec = spec
        self._last_report = None
        self._last_press = 0.0
        self._sent = set()

    def on_step(self, now: float) -> None:
        sim = self.sim
        # take scheduled services down first so this step's probe sees it
        for index, when in self.spec.down_at.items():
            services = sim.services[self.spec.name]
            if now >= when and 0 <= index < len(services):
                services[index].up = False
        for i, (when, text) in enumerate(self.spec.commands):
            if now >= when and i not in self._sent:
                self._sent.add(i)
                self.daemon.submit_command(text, now=now)
        silent = self.spec.silent_after is not None and now >= self.spec.silent_after
        interval = sim.config.report_interval
        due = self._last_report is None or now - self._last_report >= interval - 1e-9
        if not silent and due:
            self.daemon.report_once(now=now)
            self._last_report = now
        if self.spec.press_period is not None:
            update = sim.server.score_update(sim.game_id, now=now)
            active = update.clock.get("active_player")
            if (update.phase == "running" and not update.paused
                    and active == self.spec.name
                    and now - self._last_press >= self.spec.press_period - 1e-9):
                sim.server.clock_press(sim.game_id, self.spec.name, now=now)
                self._last_press = now


class _BotActor:
    def __init__(self, sim: Simulation, daemon: PlayerDaemon, bot: Bot,
                 act_period: float | None):
        self.sim = sim
        self.daemon = daemon
        self.bot = bot
        self.period = act_period if act_period is not None else sim.config.report_interval
        self._last_report = None
        self._last_act = None

    def on_step(self, now: float) -> None:
        interval = self.sim.config.report_interval
        if self._last_report is None or now - self._last_report >= interval - 1e-9:
            self.daemon.report_once(now=now)
            self._last_report = now
        if self._last_act is None or now - self._last_act >= self.period - 1e-9:
            self.bot.step(now)
            self._last_act = now


# --- canned scenarios ---------------------------------------------------------


def simulate(
    mode: str = "objective",
    seed: int = 0,
    scenario: str | None = None,
    out_dir: str | None = None,
    *,
    default_health: int = 100,
    damage_constant: float = 1.0,
    report_interval: float = 1.0,
    time_limit: float | None = None,
    clock_budget: float | None = None,
    defeat_fraction: float = 1.0,
    reshuffle_interval: float | None = None,
    units_per_player: int = 3,
    decentralized: bool = False,
    step: float = 1.0,
    max_time: float | None = None,
    corpus_dir=None,
) -> SimResult:
    """Run one canned match. Scenarios:

    bot       a bot attacks a dutifully reporting victim (objective default)
    silent    one player's daemon never reports; decay does the rest
    downtime  one victim unit drops early; pure decay race to the bottom
    idle      both players report, nobody attacks (time-mode default)
    duel      speed mode: scripted press cadences until a clock dies
    """
    game_mode = GameMode(mode)
    if scenario is None:
        scenario = {"objective": "bot", "time": "idle", "speed": "duel"}[game_mode.value]
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    if game_mode == GameMode.TIME and time_limit is None:
        time_limit = 30.0
    if game_mode == GameMode.SPEED and clock_budget is None:
        clock_budget = 5.0
    config = GameConfig(
        mode=game_mode,
        default_health=default_health,
        damage_constant=damage_constant,
        report_interval=report_interval,
        time_limit=time_limit,
        clock_budget=clock_budget,
        reshuffle_interval=reshuffle_interval,
        defeat_fraction=defeat_fraction,
        rng_seed=seed,
    )
    sim = Simulation(config, units_per_player=units_per_player,
                     decentralized=decentralized, out_dir=out_dir)

    if scenario == "bot":
        sim.add_bot("alice", corpus_dir=corpus_dir)
        sim.add_scripted(ScriptedPlayer(name="bob"))
        horizon = 60.0
    elif scenario == "silent":
        sim.add_scripted(ScriptedPlayer(name="alice"))
        sim.add_scripted(ScriptedPlayer(name="bob", silent_after=0.0))
        horizon = default_health / damage_constant + 10 * report_interval
    elif scenario == "downtime":
        sim.add_scripted(ScriptedPlayer(name="alice"))
        sim.add_scripted(ScriptedPlayer(name="bob", down_at={0: 1.0, 1: 1.0, 2: 1.0}))
        horizon = default_health / damage_constant + 10 * report_interval
    elif scenario == "idle":
        sim.add_scripted(ScriptedPlayer(name="alice"))
        sim.add_scripted(ScriptedPlayer(name="bob"))
        horizon = (time_limit or 30.0) + 5.0
    else:  # duel
        sim.add_scripted(ScriptedPlayer(name="alice", press_period=1.0))
        sim.add_scripted(ScriptedPlayer(name="bob", press_period=3.0))
        horizon = 20.0 * (clock_budget or 5.0)
    return sim.run(max_time=max_time if max_time is not None else horizon, step=step)


# --- transcript reporting ---------------------------------------------------------


def _read_ndjson(path, builder, label):
    if not os.path.exists(path):
        return []
    out = []
    with open(path, encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = canonical_decode(line.encode("ascii"))
                out.append(builder(payload))
            except (DecodeError, ValueError, UnicodeEncodeError) as exc:
                raise DecodeError(f"{label} line {line_no}: {exc}") from exc
    return out


def load_transcript(path: str) -> dict:
    meta_path = os.path.join(path, "meta.json")
    meta = {}
    if os.path.exists(meta_path):
        with open(meta_path, encoding="ascii") as fh:
            meta = canonical_decode(fh.read().encode("ascii"))
    commands = _read_ndjson(os.path.join(path, "commands.ndjson"),
                            CommandEvent.from_payload, "commands.ndjson")
    events = _read_ndjson(os.path.join(path, "events.ndjson"),
                          GameEvent.from_payload, "events.ndjson")
    return {"meta": meta, "commands": commands, "events": events}


def report(path: str, csv_dir: str | None = None) -> dict:
    """Metric summary per player plus the health timeline, both CSV-ready.
    Pure function of the transcript files."""
    if not os.path.isdir(path):
        raise OSError(f"no transcript directory at {path}")
    transcript = load_transcript(path)
    meta = transcript["meta"]
    commands = transcript["commands"]
    events = transcript["events"]
    started = float(meta.get("started_at", 0.0))
    finished = float(meta.get("finished_at", started))
    players = sorted(meta.get("players", []) or {e.player for e in commands})
    summary = {
        name: metrics_mod.snapshot(commands, name, finished, started).as_dict()
        for name in players
    }
    timeline = [
        {
            "timestamp": e.timestamp,
            "player": e.player,
            "unit": e.data.get("unit", ""),
            "health": e.data.get("health", 0.0),
        }
        for e in events
        if e.kind == "health"
    ]
    result = {"meta": meta, "players": summary, "timeline": timeline}
    if csv_dir is not None:
        os.makedirs(csv_dir, exist_ok=True)
        metric_names = ["copm", "copm_sliding", "cpm", "epm", "cope",
                        "consistency", "commands", "keystrokes"]
        with open(os.path.join(csv_dir, "metrics.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["player"] + metric_names)
            for name in players:
                writer.writerow([name] + [summary[name][m] for m in metric_names])
        with open(os.path.join(csv_dir, "timeline.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["timestamp", "player", "unit", "health"])
            for row in timeline:
                writer.writerow([row["timestamp"], row["player"], row["unit"], row["health"]])
    return result


def format_report(result: dict) -> str:
    lines = []
    meta = result["meta"]
    if meta:
        outcome = "draw" if meta.get("draw") else (meta.get("winner") or "unfinished")
        lines.append(f"game {meta.get('game_id', '?')} [{meta.get('mode', '?')}]"
                     f" seed={meta.get('seed')} outcome={outcome}")
    header = f"{'player':<12}{'copm':>8}{'cpm':>8}{'epm':>8}{'cope':>8}{'consist':>9}{'cmds':>6}"
    lines.append(header)
    for name, m in result["players"].items():
        lines.append(
            f"{name:<12}{m['copm']:>8.2f}{m['cpm']:>8.2f}{m['epm']:>8.2f}"
            f"{m['cope']:>8.2f}{m['consistency']:>9.2f}{m['commands']:>6d}"
        )
    lines.append(f"{len(result['timeline'])} health change(s) recorded")
    return "\n".join(lines)
