"""Core domain model: units, realms, players, games.

Everything here is an immutable value type. Operations that "mutate" a game
(`reshuffle_unit`, the health engine, the game server) build and return new
snapshots, so a GameState can be handed to other threads, hashed into a
ledger block, or diffed against a later snapshot without defensive copies.
"""

import hashlib
import json
import random
import re
from dataclasses import dataclass, replace
from enum import Enum

FINGERPRINT_BYTES = 32
_FINGERPRINT_RE = re.compile(r"^[0-9a-f]{64}$")

PORT_MIN = 1024
PORT_MAX = 65535


class GameMode(str, Enum):
    OBJECTIVE = "objective"
    TIME = "time"
    SPEED = "speed"


class GamePhase(str, Enum):
    LOBBY = "lobby"
    RUNNING = "running"
    FINISHED = "finished"


class ActionKind(str, Enum):
    GET_OPPONENT_IP = "get_opponent_ip"
    GET_FLAGS = "get_flags"
    ENTER_UNIT = "enter_unit"
    CAPTURE_UNIT = "capture_unit"
    ATTACK_UNIT = "attack_unit"


@dataclass(frozen=True)
class UnitClass:
    """A category of unit: one mock service on a well-known port.

    ``vuln_key`` is the secret the mock service accepts as its exploit.
    Knowing a class means knowing how to pop any unit of that class; the
    work during a match is finding out which class sits on which port.
    """

    class_id: str
    name: str
    service_port: int
    vuln_key: str
    description: str = ""

    def __post_init__(self):
        if not self.class_id:
            raise ValueError("class_id must be nonempty")
        if not (PORT_MIN <= self.service_port <= PORT_MAX):
            raise ValueError(
                f"service_port {self.service_port} outside [{PORT_MIN}, {PORT_MAX}]"
            )


@dataclass(frozen=True)
class UnitState:
    """One game piece as the server sees it."""

    unit_id: str
    owner: str
    class_id: str
    port: int
    health: float
    fingerprint: str
    status_code: int = 200
    alive: bool = True

    def __post_init__(self):
        if self.health < 0:
            raise ValueError("health must be >= 0")
        if self.alive != (self.health > 0):
            raise ValueError("alive flag inconsistent with health")
        if self.status_code not in (200, 400):
            raise ValueError(f"status_code must be 200 or 400, got {self.status_code}")
        if not _FINGERPRINT_RE.match(self.fingerprint):
            raise ValueError("fingerprint must be 64 lowercase hex chars")


def with_health(unit: UnitState, health: float, status_code: int | None = None) -> UnitState:
    """Copy of ``unit`` at a new health value, alive flag kept consistent."""
    health = max(0.0, health)
    return replace(
        unit,
        health=health,
        alive=health > 0,
        status_code=unit.status_code if status_code is None else status_code,
    )


def is_well_formed_fingerprint(text: str) -> bool:
    return isinstance(text, str) and bool(_FINGERPRINT_RE.match(text))


@dataclass(frozen=True)
class Realm:
    """All units belonging to one player."""

    owner: str
    units: tuple[UnitState, ...]

    def __post_init__(self):
        if len(self.units) < 1:
            raise ValueError("a realm holds at least one unit")
        for u in self.units:
            if u.owner != self.owner:
                raise ValueError(f"unit {u.unit_id} owned by {u.owner}, not {self.owner}")


@dataclass(frozen=True)
class Player:
    name: str
    realm: Realm
    opponent: str
    host_address: str = "127.0.0.1"

    def __post_init__(self):
        if not self.name:
            raise ValueError("player name must be nonempty")
        if self.opponent == self.name:
            raise ValueError("a player cannot be their own opponent")


@dataclass(frozen=True)
class GameConfig:
    mode: GameMode = GameMode.OBJECTIVE
    default_health: float = 100.0
    damage_constant: float = 1.0  # health points per second of downtime
    report_interval: float = 1.0  # seconds between status reports
    time_limit: float = 600.0  # time mode: match length in seconds
    clock_budget: float = 300.0  # speed mode: per-player clock in seconds
    reshuffle_interval: float | None = None  # periodic unit replacement, off by default
    defeat_fraction: float = 1.0  # share of units that must die to lose (objective)
    rng_seed: int = 0

    def __post_init__(self):
        if self.default_health < 1:
            raise ValueError("default_health must be >= 1")
        if self.damage_constant <= 0:
            raise ValueError("damage_constant must be > 0")
        if self.report_interval <= 0:
            raise ValueError("report_interval must be > 0")
        if not (0 < self.defeat_fraction <= 1):
            raise ValueError("defeat_fraction must be in (0, 1]")
        if self.reshuffle_interval is not None and self.reshuffle_interval <= 0:
            raise ValueError("reshuffle_interval must be > 0 when set")
        if self.mode == GameMode.TIME and (self.time_limit is None
                                           or self.time_limit <= 0):
            raise ValueError("time mode requires a positive time limit")
        if self.mode == GameMode.SPEED and (self.clock_budget is None
                                            or self.clock_budget <= 0):
            raise ValueError("speed mode requires a clock budget")


@dataclass(frozen=True)
class GameState:
    """Full match snapshot. The game server owns the authoritative one."""

    game_id: str
    config: GameConfig
    players: tuple[Player, ...]
    class_pool: tuple[UnitClass, ...]
    tick: int = 0
    phase: GamePhase = GamePhase.LOBBY
    winner: str | None = None
    started_at: float | None = None

    def __post_init__(self):
        if len(self.players) < 2:
            raise ValueError("a game needs at least 2 players")
        names = [p.name for p in self.players]
        if len(set(names)) != len(names):
            raise ValueError("player names must be unique")
        fps = [u.fingerprint for u in game_units(self)]
        if len(set(fps)) != len(fps):
            raise ValueError("fingerprints must be unique across the game")
        if self.winner is not None and self.phase is not GamePhase.FINISHED:
            raise ValueError("winner can only be set on a finished game")
        if self.winner is not None and self.winner not in names:
            raise ValueError("winner must be one of the players")
        if self.tick < 0:
            raise ValueError("tick must be >= 0")


@dataclass(frozen=True)
class ActionRecord:
    actor: str
    kind: ActionKind
    payload: str
    timestamp: float


def game_units(state: GameState) -> list[UnitState]:
    """Every unit in the arena: the union of all player realms."""
    units: list[UnitState] = []
    for p in state.players:
        units.extend(p.realm.units)
    return units


def find_player(state: GameState, name: str) -> Player:
    for p in state.players:
        if p.name == name:
            return p
    raise KeyError(f"unknown player {name!r}")


def find_unit(state: GameState, unit_id: str) -> UnitState:
    for u in game_units(state):
        if u.unit_id == unit_id:
            return u
    raise KeyError(f"unknown unit {unit_id!r}")


def replace_unit(state: GameState, new_unit: UnitState) -> GameState:
    """New snapshot with the unit of the same unit_id swapped out."""
    return _swap_unit(state, new_unit.unit_id, new_unit)


def _swap_unit(state: GameState, old_unit_id: str, new_unit: UnitState) -> GameState:
    players = []
    found = False
    for p in state.players:
        units = list(p.realm.units)
        for i, u in enumerate(units):
            if u.unit_id == old_unit_id:
                units[i] = new_unit
                found = True
        players.append(replace(p, realm=replace(p.realm, units=tuple(units))))
    if not found:
        raise KeyError(f"unknown unit {old_unit_id!r}")
    return replace(state, players=tuple(players))


def unit_identity(fingerprint: str) -> str:
    """Public identifier for a unit: a hash of its secret fingerprint.

    Status reports, events and ledger blocks carry this identity, never the
    fingerprint itself, so the proof-of-exploitation secret is not leaked by
    the scoring plumbing.
    """
    return hashlib.sha256(fingerprint.encode("ascii")).hexdigest()[:16]


def birth_unit(owner: str, cls: UnitClass, config: GameConfig, rng: random.Random) -> UnitState:
    """Bring one unit to life with a fresh fingerprint and default health."""
    fingerprint = rng.randbytes(FINGERPRINT_BYTES).hex()
    return UnitState(
        unit_id=unit_identity(fingerprint),
        owner=owner,
        class_id=cls.class_id,
        port=cls.service_port,
        health=config.default_health,
        fingerprint=fingerprint,
        status_code=200,
        alive=True,
    )


def new_game(
    config: GameConfig,
    player_names: list[str],
    class_pool: list[UnitClass] | None = None,
    units_per_player: int = 3,
    host_addresses: dict[str, str] | None = None,
    game_id: str | None = None,
) -> GameState:
    """Create a lobby-phase game with randomized unit births.

    Each player receives ``units_per_player`` units drawn from the class
    pool by the seeded RNG, so the same seed reproduces the same realms.
    Classes are drawn without replacement per realm: every unit needs its
    own port on its owner's host. Opponents are assigned cyclically: with
    two players they target each other, with more each player targets the
    next name in the list.
    """
    if class_pool is None:
        class_pool = DEFAULT_CLASS_POOL
    if len(player_names) < 2:
        raise ValueError("need at least 2 players")
    if len(set(player_names)) != len(player_names):
        raise ValueError("duplicate player name")
    if not class_pool:
        raise ValueError("class pool must not be empty")
    if units_per_player < 1:
        raise ValueError("units_per_player must be >= 1")
    if units_per_player > len(class_pool):
        raise ValueError(
            f"units_per_player ({units_per_player}) exceeds the pool's "
            f"{len(class_pool)} distinct classes"
        )

    rng = random.Random(config.rng_seed)
    if game_id is None:
        game_id = "g-" + rng.randbytes(4).hex()

    hosts = host_addresses or {}
    players = []
    n = len(player_names)
    for i, name in enumerate(player_names):
        classes = rng.sample(list(class_pool), units_per_player)
        units = tuple(birth_unit(name, cls, config, rng) for cls in classes)
        players.append(
            Player(
                name=name,
                realm=Realm(owner=name, units=units),
                opponent=player_names[(i + 1) % n],
                host_address=hosts.get(name, "127.0.0.1"),
            )
        )
    return GameState(
        game_id=game_id,
        config=config,
        players=tuple(players),
        class_pool=tuple(class_pool),
    )


def reshuffle_unit(state: GameState, owner: str, unit_id: str, rng: random.Random) -> GameState:
    """Decommission a living unit and shuffle a fresh one into its place.

    The replacement is drawn from the game's class pool with a new
    fingerprint and full default health; the realm keeps the same size.
    """
    unit = find_unit(state, unit_id)  # raises KeyError for unknown ids
    if unit.owner != owner:
        raise ValueError(f"unit {unit_id!r} is not owned by {owner!r}")
    if not unit.alive:
        raise ValueError(f"unit {unit_id!r} is already destroyed")
    taken = {
        u.port
        for u in find_player(state, owner).realm.units
        if u.unit_id != unit_id
    }
    candidates = [c for c in state.class_pool if c.service_port not in taken]
    if not candidates:  # realm uses every pool port: keep the class, new secret
        candidates = [c for c in state.class_pool if c.class_id == unit.class_id]
    cls = rng.choice(candidates)
    fresh = birth_unit(owner, cls, state.config, rng)
    return _swap_unit(state, unit_id, fresh)


# Default class pool, one class per trial port. The vuln_key stands in for
# "knowing the exploit" for that service class.
DEFAULT_CLASS_POOL: tuple[UnitClass, ...] = (
    UnitClass(
        class_id="qs-rce",
        name="query-string RCE app",
        service_port=3001,
        vuln_key="qs-rce-sesame",
        description="app server that executes system calls from request parameters",
    ),
    UnitClass(
        class_id="form-inject",
        name="unfiltered form POST",
        service_port=3002,
        vuln_key="form-inject-sesame",
        description="web app with command injection through an unfiltered form",
    ),
    UnitClass(
        class_id="ping-inject",
        name="ping field injection",
        service_port=3003,
        vuln_key="ping-inject-sesame",
        description="diagnostic ping endpoint that concatenates its input into a shell",
    ),
)


def load_class_pool(path: str) -> list[UnitClass]:
    """Read a class pool file.

    The file is a JSON array of objects with keys ``class_id``, ``name``,
    ``service_port``, ``vuln_key`` and optional ``description``.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list) or not raw:
        raise ValueError(f"{path}: expected a nonempty JSON array of unit classes")
    pool = []
    for i, entry in enumerate(raw):
        try:
            pool.append(
                UnitClass(
                    class_id=entry["class_id"],
                    name=entry["name"],
                    service_port=int(entry["service_port"]),
                    vuln_key=entry["vuln_key"],
                    description=entry.get("description", ""),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}: bad class entry #{i}: {exc}") from exc
    ids = [c.class_id for c in pool]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate class_id")
    return pool


def save_class_pool(pool: list[UnitClass], path: str) -> None:
    data = [
        {
            "class_id": c.class_id,
            "name": c.name,
            "service_port": c.service_port,
            "vuln_key": c.vuln_key,
            "description": c.description,
        }
        for c in pool
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
