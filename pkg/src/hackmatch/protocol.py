"""Wire format for player/server/scoreboard sync.

Payloads are canonical JSON: sorted keys, no whitespace, ASCII only, no
NaN/Infinity. The same bytes are the hashing preimage for ledger blocks, so
encoding must be deterministic. Frames are the payload prefixed with its
length as a 4-byte big-endian integer.

The topic scheme is game/{game_id}/player/{name}/{channel}. Players publish
reports, captures, command events and clock presses on their own ``status``
channel; the server pushes derived data back on ``score``, ``opponent`` and
``events``. Subscriptions may use ``+`` to match one path level; publish
paths never contain wildcards.
"""

import json
import struct
from dataclasses import dataclass, field, replace

CHANNELS = ("status", "score", "opponent", "events")

_HEADER = struct.Struct(">I")
HEADER_SIZE = _HEADER.size
MAX_FRAME_BYTES = 16 * 1024 * 1024


class DecodeError(ValueError):
    """Malformed payload; ``field`` names the offending field."""

    def __init__(self, message: str, field_name: str = ""):
        super().__init__(message)
        self.field = field_name


class IncompleteFrameError(Exception):
    """Not enough bytes for a whole frame yet."""


def canonical_dumps(obj) -> str:
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False
    )


def canonical_encode(obj) -> bytes:
    return canonical_dumps(obj).encode("ascii")


def canonical_decode(data: bytes):
    try:
        return json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"payload is not valid JSON: {exc}") from exc


def encode_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME_BYTES:
        raise ValueError(f"frame of {len(payload)} bytes exceeds limit")
    return _HEADER.pack(len(payload)) + payload


def decode_frame(data: bytes) -> tuple[bytes, bytes]:
    """Split one frame off the front of ``data``; returns (payload, rest)."""
    if len(data) < HEADER_SIZE:
        raise IncompleteFrameError(f"have {len(data)} bytes, need {HEADER_SIZE} for header")
    (length,) = _HEADER.unpack_from(data)
    if length > MAX_FRAME_BYTES:
        raise DecodeError(f"declared frame length {length} exceeds limit")
    end = HEADER_SIZE + length
    if len(data) < end:
        raise IncompleteFrameError(f"have {len(data)} bytes, need {end}")
    return data[HEADER_SIZE:end], data[end:]


class FrameDecoder:
    """Incremental frame splitter for a byte stream."""

    def __init__(self):
        self._buf = b""

    def feed(self, data: bytes) -> list[bytes]:
        self._buf += data
        frames = []
        while True:
            try:
                payload, self._buf = decode_frame(self._buf)
            except IncompleteFrameError:
                break
            frames.append(payload)
        return frames

    @property
    def pending(self) -> int:
        return len(self._buf)


# --- field validation helpers -----------------------------------------------

def _get(payload: dict, name: str, types, where: str = ""):
    label = f"{where}.{name}" if where else name
    if name not in payload:
        raise DecodeError(f"missing field {label!r}", label)
    value = payload[name]
    if types is float:
        # ints are acceptable wherever a real number is expected
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DecodeError(f"field {label!r} must be a number", label)
        return float(value)
    if types is int and isinstance(value, bool):
        raise DecodeError(f"field {label!r} must be an integer", label)
    if not isinstance(value, types):
        raise DecodeError(f"field {label!r} has wrong type {type(value).__name__}", label)
    return value


def _get_opt(payload: dict, name: str, types, default=None):
    if name not in payload or payload[name] is None:
        return default
    return _get(payload, name, types)


# --- message registry --------------------------------------------------------

MESSAGE_TYPES: dict[str, type] = {}


def register_message(tag: str):
    """Class decorator: make a dataclass encodable/decodable by type tag."""

    def wrap(cls):
        if tag in MESSAGE_TYPES:
            raise ValueError(f"duplicate message tag {tag!r}")
        cls.TYPE = tag
        MESSAGE_TYPES[tag] = cls
        return cls

    return wrap


def message_bytes(msg) -> bytes:
    """Canonical unframed bytes of a message (the ledger hashing preimage)."""
    payload = {"type": msg.TYPE}
    payload.update(msg.to_payload())
    # request correlation tag; absent unless set, so untagged bytes are stable
    txn = getattr(msg, "txn", "")
    if txn:
        payload["txn"] = txn
    return canonical_encode(payload)


def encode(msg) -> bytes:
    """Message to one wire frame."""
    return encode_frame(message_bytes(msg))


def decode_payload(payload_bytes: bytes):
    """Unframed canonical payload back to a message object."""
    obj = canonical_decode(payload_bytes)
    if not isinstance(obj, dict):
        raise DecodeError("payload must be a JSON object")
    tag = obj.get("type")
    if not isinstance(tag, str):
        raise DecodeError("missing field 'type'", "type")
    cls = MESSAGE_TYPES.get(tag)
    if cls is None:
        raise DecodeError(f"unknown message type {tag!r}", "type")
    body = dict(obj)
    del body["type"]
    msg = cls.from_payload(body)
    txn = body.get("txn")
    if isinstance(txn, str) and txn and hasattr(msg, "txn"):
        msg = replace(msg, txn=txn)
    return msg


def decode(data: bytes):
    """One framed message off the front of ``data``; returns (message, rest)."""
    payload, rest = decode_frame(data)
    return decode_payload(payload), rest


# --- messages ----------------------------------------------------------------

@register_message("unit_report")
@dataclass(frozen=True)
class UnitReport:
    """Per-unit line of a status report: probe code, identity hash, health, port."""

    code: int
    id: str
    health: float
    port: int

    def __post_init__(self):
        if self.code not in (200, 400):
            raise ValueError(f"code must be 200 or 400, got {self.code}")
        if self.health < 0:
            raise ValueError("health must be >= 0")

    def to_payload(self) -> dict:
        return {"code": self.code, "id": self.id, "health": self.health, "port": self.port}

    @classmethod
    def from_payload(cls, p: dict, where: str = "") -> "UnitReport":
        code = _get(p, "code", int, where)
        if code not in (200, 400):
            label = f"{where}.code" if where else "code"
            raise DecodeError(f"field {label!r} must be 200 or 400, got {code}", label)
        health = _get(p, "health", float, where)
        if health < 0:
            label = f"{where}.health" if where else "health"
            raise DecodeError(f"field {label!r} must be >= 0", label)
        return cls(
            code=code,
            id=_get(p, "id", str, where),
            health=health,
            port=_get(p, "port", int, where),
        )


@register_message("status_report")
@dataclass(frozen=True)
class StatusReport:
    """A player daemon's periodic liveness report for its whole realm.

    ``cmds`` is free-form recent command metadata (string keys, scalar
    values). ``units`` carry probe results; unit ``health`` echoes the
    reporter's last known value and is not trusted by the server.
    """

    timestamp: float
    ip: str
    player_name: str
    cmds: dict = field(default_factory=dict)
    units: tuple[UnitReport, ...] = ()

    def to_payload(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "ip": self.ip,
            "playerName": self.player_name,
            "cmds": dict(self.cmds),
            "units": [u.to_payload() for u in self.units],
        }

    @classmethod
    def from_payload(cls, p: dict) -> "StatusReport":
        cmds = _get(p, "cmds", dict)
        for key, value in cmds.items():
            if not isinstance(key, str):
                raise DecodeError("field 'cmds' keys must be strings", "cmds")
            if isinstance(value, bool) or not isinstance(value, (str, int, float)):
                raise DecodeError(
                    f"field 'cmds.{key}' must be a string or number", f"cmds.{key}"
                )
        raw_units = _get(p, "units", list)
        units = tuple(
            UnitReport.from_payload(u, where=f"units[{i}]")
            if isinstance(u, dict)
            else _bad_unit(i)
            for i, u in enumerate(raw_units)
        )
        return cls(
            timestamp=_get(p, "timestamp", float),
            ip=_get(p, "ip", str),
            player_name=_get(p, "playerName", str),
            cmds=dict(cmds),
            units=units,
        )


def _bad_unit(i: int):
    raise DecodeError(f"field 'units[{i}]' must be an object", f"units[{i}]")


@register_message("capture")
@dataclass(frozen=True)
class CaptureSubmission:
    """Proof-of-exploitation claim. The fingerprint is a claim from an
    untrusted client; well-formedness is judged by the game server, which
    answers malformed input with a rejection verdict rather than an error."""

    attacker: str
    claimed_fingerprint: str
    timestamp: float
    txn: str = ""

    def to_payload(self) -> dict:
        return {
            "attacker": self.attacker,
            "claimed_fingerprint": self.claimed_fingerprint,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_payload(cls, p: dict) -> "CaptureSubmission":
        return cls(
            attacker=_get(p, "attacker", str),
            claimed_fingerprint=_get(p, "claimed_fingerprint", str),
            timestamp=_get(p, "timestamp", float),
        )


@register_message("capture_verdict")
@dataclass(frozen=True)
class CaptureVerdict:
    attacker: str
    accepted: bool
    unit_id: str | None = None
    reason: str = ""
    txn: str = ""

    def to_payload(self) -> dict:
        return {
            "attacker": self.attacker,
            "accepted": self.accepted,
            "unit_id": self.unit_id,
            "reason": self.reason,
        }

    @classmethod
    def from_payload(cls, p: dict) -> "CaptureVerdict":
        return cls(
            attacker=_get(p, "attacker", str),
            accepted=_get(p, "accepted", bool),
            unit_id=_get_opt(p, "unit_id", str),
            reason=_get_opt(p, "reason", str, ""),
        )


@register_message("register")
@dataclass(frozen=True)
class RegisterPlayer:
    game_id: str
    player: str
    host: str = "127.0.0.1"
    txn: str = ""

    def to_payload(self) -> dict:
        return {"game_id": self.game_id, "player": self.player, "host": self.host}

    @classmethod
    def from_payload(cls, p: dict) -> "RegisterPlayer":
        return cls(
            game_id=_get(p, "game_id", str),
            player=_get(p, "player", str),
            host=_get_opt(p, "host", str, "127.0.0.1"),
        )


@register_message("registered")
@dataclass(frozen=True)
class Registered:
    game_id: str
    player: str
    ok: bool
    opponent: str = ""
    reason: str = ""
    txn: str = ""

    def to_payload(self) -> dict:
        return {
            "game_id": self.game_id,
            "player": self.player,
            "ok": self.ok,
            "opponent": self.opponent,
            "reason": self.reason,
        }

    @classmethod
    def from_payload(cls, p: dict) -> "Registered":
        return cls(
            game_id=_get(p, "game_id", str),
            player=_get(p, "player", str),
            ok=_get(p, "ok", bool),
            opponent=_get_opt(p, "opponent", str, ""),
            reason=_get_opt(p, "reason", str, ""),
        )


@register_message("control")
@dataclass(frozen=True)
class GameControl:
    """Operator op: start, pause, resume, or a speed-clock press."""

    game_id: str
    op: str
    player: str = ""
    timestamp: float = 0.0
    txn: str = ""

    OPS = ("start", "pause", "resume", "clock_press")

    def __post_init__(self):
        if self.op not in self.OPS:
            raise ValueError(f"unknown control op {self.op!r}")

    def to_payload(self) -> dict:
        return {
            "game_id": self.game_id,
            "op": self.op,
            "player": self.player,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_payload(cls, p: dict) -> "GameControl":
        op = _get(p, "op", str)
        if op not in cls.OPS:
            raise DecodeError(f"field 'op' must be one of {cls.OPS}, got {op!r}", "op")
        return cls(
            game_id=_get(p, "game_id", str),
            op=op,
            player=_get_opt(p, "player", str, ""),
            timestamp=_get_opt(p, "timestamp", float, 0.0),
        )


@register_message("opponent_request")
@dataclass(frozen=True)
class OpponentInfoRequest:
    game_id: str
    player: str
    txn: str = ""

    def to_payload(self) -> dict:
        return {"game_id": self.game_id, "player": self.player}

    @classmethod
    def from_payload(cls, p: dict) -> "OpponentInfoRequest":
        return cls(game_id=_get(p, "game_id", str), player=_get(p, "player", str))


@register_message("opponent_info")
@dataclass(frozen=True)
class OpponentInfo:
    game_id: str
    player: str
    opponent: str
    host: str
    txn: str = ""

    def to_payload(self) -> dict:
        return {
            "game_id": self.game_id,
            "player": self.player,
            "opponent": self.opponent,
            "host": self.host,
        }

    @classmethod
    def from_payload(cls, p: dict) -> "OpponentInfo":
        return cls(
            game_id=_get(p, "game_id", str),
            player=_get(p, "player", str),
            opponent=_get(p, "opponent", str),
            host=_get(p, "host", str),
        )


@register_message("realm_request")
@dataclass(frozen=True)
class RealmInfoRequest:
    game_id: str
    player: str
    txn: str = ""

    def to_payload(self) -> dict:
        return {"game_id": self.game_id, "player": self.player}

    @classmethod
    def from_payload(cls, p: dict) -> "RealmInfoRequest":
        return cls(game_id=_get(p, "game_id", str), player=_get(p, "player", str))


@register_message("realm_info")
@dataclass(frozen=True)
class RealmInfo:
    """A player's own realm, secrets included. Served only to the owner:
    fingerprints leaving this scope would hand out free captures."""

    game_id: str
    player: str
    units: tuple = ()
    txn: str = ""

    def to_payload(self) -> dict:
        return {
            "game_id": self.game_id,
            "player": self.player,
            "units": [dict(u) for u in self.units],
        }

    @classmethod
    def from_payload(cls, p: dict) -> "RealmInfo":
        raw = _get(p, "units", list)
        units = []
        for i, u in enumerate(raw):
            if not isinstance(u, dict):
                raise DecodeError(f"field 'units[{i}]' must be an object", f"units[{i}]")
            for name, kind in (("id", str), ("port", int), ("class_id", str),
                               ("fingerprint", str), ("vuln_key", str), ("health", float)):
                _get(u, name, kind, where=f"units[{i}]")
            units.append(dict(u))
        return cls(
            game_id=_get(p, "game_id", str),
            player=_get(p, "player", str),
            units=tuple(units),
        )


@register_message("event")
@dataclass(frozen=True)
class GameEvent:
    """One entry of the live event feed.

    ``seq`` increases by one per event within a game, so feed consumers can
    deduplicate fan-out copies and assert ordering. ``player`` is the player
    the event is about; game-scoped events (phase changes, clocks, winners)
    leave it empty.
    """

    game_id: str
    seq: int
    tick: int
    timestamp: float
    kind: str
    player: str = ""
    data: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "game_id": self.game_id,
            "seq": self.seq,
            "tick": self.tick,
            "timestamp": self.timestamp,
            "kind": self.kind,
            "player": self.player,
            "data": dict(self.data),
        }

    @classmethod
    def from_payload(cls, p: dict) -> "GameEvent":
        return cls(
            game_id=_get(p, "game_id", str),
            seq=_get(p, "seq", int),
            tick=_get(p, "tick", int),
            timestamp=_get(p, "timestamp", float),
            kind=_get(p, "kind", str),
            player=_get_opt(p, "player", str, ""),
            data=_get_opt(p, "data", dict, {}),
        )


@register_message("score")
@dataclass(frozen=True)
class ScoreUpdate:
    """Derived scoreboard state for one game: healths, clocks, metrics."""

    game_id: str
    timestamp: float
    tick: int
    phase: str
    winner: str | None
    draw: bool
    paused: bool
    players: dict = field(default_factory=dict)
    clock: dict = field(default_factory=dict)
    txn: str = ""

    def to_payload(self) -> dict:
        return {
            "game_id": self.game_id,
            "timestamp": self.timestamp,
            "tick": self.tick,
            "phase": self.phase,
            "winner": self.winner,
            "draw": self.draw,
            "paused": self.paused,
            "players": dict(self.players),
            "clock": dict(self.clock),
        }

    @classmethod
    def from_payload(cls, p: dict) -> "ScoreUpdate":
        return cls(
            game_id=_get(p, "game_id", str),
            timestamp=_get(p, "timestamp", float),
            tick=_get(p, "tick", int),
            phase=_get(p, "phase", str),
            winner=_get_opt(p, "winner", str),
            draw=_get(p, "draw", bool),
            paused=_get(p, "paused", bool),
            players=_get_opt(p, "players", dict, {}),
            clock=_get_opt(p, "clock", dict, {}),
        )


@register_message("error")
@dataclass(frozen=True)
class ErrorMessage:
    reason: str
    field_name: str = ""
    txn: str = ""

    def to_payload(self) -> dict:
        return {"reason": self.reason, "field_name": self.field_name}

    @classmethod
    def from_payload(cls, p: dict) -> "ErrorMessage":
        return cls(
            reason=_get(p, "reason", str),
            field_name=_get_opt(p, "field_name", str, ""),
        )


# --- topics ------------------------------------------------------------------

@dataclass(frozen=True)
class Topic:
    game_id: str
    player: str
    channel: str

    def __post_init__(self):
        for label, part in (("game_id", self.game_id), ("player", self.player)):
            if not part:
                raise ValueError(f"topic {label} must be nonempty")
            if "/" in part or "+" in part or "#" in part:
                raise ValueError(f"topic {label} contains reserved characters: {part!r}")
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")

    @property
    def path(self) -> str:
        return f"game/{self.game_id}/player/{self.player}/{self.channel}"


def topic_for(game_id: str, player: str, channel: str) -> Topic:
    return Topic(game_id=game_id, player=player, channel=channel)


def topic_matches(pattern: str, path: str) -> bool:
    """MQTT-style match: ``+`` matches exactly one path level."""
    pat = pattern.split("/")
    got = path.split("/")
    if len(pat) != len(got):
        return False
    return all(p == "+" or p == g for p, g in zip(pat, got))
