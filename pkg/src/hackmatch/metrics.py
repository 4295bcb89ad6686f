"""Gameplay metrics over captured keystroke and command streams.

All rates are per minute. Commands-per-minute comes in two flavours: a
running total over the whole match, and a sliding measure that counts the
last ten seconds and scales by six. Efficiency counts chained commands
(top-level ``;`` separators, quote-aware). Error rate counts Delete and
Backspace presses. Consistency compares distinct command heads against the
number of submissions.
"""

from dataclasses import dataclass, field
from enum import Enum

from . import protocol
from .protocol import DecodeError, _get, _get_opt, register_message

WINDOW_SECONDS = 10.0
WINDOW_PER_MINUTE = 60.0 / WINDOW_SECONDS

# Key names that count as corrections. Raw control bytes are accepted too so
# terminal capture does not have to pretty-print before logging.
ERROR_KEYS = frozenset({"Backspace", "Delete", "\b", "\x7f"})


class EventKind(str, Enum):
    KEYSTROKE = "keystroke"
    COMMAND = "command"


@register_message("command_event")
@dataclass(frozen=True)
class CommandEvent:
    """One captured keystroke or submitted command line.

    Keystroke text is a single character or a named control key such as
    ``Backspace``. Command text is the full submitted line.
    """

    player: str
    timestamp: float
    kind: EventKind
    text: str
    valid: bool = True

    def __post_init__(self):
        if not self.player:
            raise ValueError("player must be nonempty")
        if self.kind == EventKind.COMMAND and not self.text:
            raise ValueError("submitted command text must be nonempty")

    def to_payload(self) -> dict:
        return {
            "player": self.player,
            "timestamp": self.timestamp,
            "kind": self.kind.value,
            "text": self.text,
            "valid": self.valid,
        }

    @classmethod
    def from_payload(cls, p: dict) -> "CommandEvent":
        kind = _get(p, "kind", str)
        try:
            kind = EventKind(kind)
        except ValueError:
            raise DecodeError(f"field 'kind' must be keystroke or command, got {kind!r}", "kind")
        text = _get(p, "text", str)
        if kind == EventKind.COMMAND and not text:
            raise DecodeError("field 'text' must be nonempty for commands", "text")
        return cls(
            player=_get(p, "player", str),
            timestamp=_get(p, "timestamp", float),
            kind=kind,
            text=text,
            valid=_get_opt(p, "valid", bool, True),
        )


def is_error_key(text: str) -> bool:
    return text in ERROR_KEYS


# --- rate metrics ------------------------------------------------------------

def copm_total(events, elapsed_minutes: float) -> float:
    """Valid commands per minute over the whole match so far."""
    if elapsed_minutes <= 0:
        raise ValueError("elapsed_minutes must be > 0")
    count = sum(1 for e in events if e.kind == EventKind.COMMAND and e.valid)
    return count / elapsed_minutes


def copm_window(events, now: float) -> float:
    """Commands per minute from the trailing ten-second window, scaled x6."""
    lo = now - WINDOW_SECONDS
    count = sum(
        1
        for e in events
        if e.kind == EventKind.COMMAND and e.valid and lo < e.timestamp <= now
    )
    return WINDOW_PER_MINUTE * count


def cpm(events, elapsed_minutes: float) -> float:
    """Keystrokes per minute; corrections count as presses."""
    if elapsed_minutes <= 0:
        raise ValueError("elapsed_minutes must be > 0")
    count = sum(1 for e in events if e.kind == EventKind.KEYSTROKE)
    return count / elapsed_minutes


def epm(events, elapsed_minutes: float) -> float:
    """Delete/Backspace presses per minute."""
    if elapsed_minutes <= 0:
        raise ValueError("elapsed_minutes must be > 0")
    count = sum(
        1 for e in events if e.kind == EventKind.KEYSTROKE and is_error_key(e.text)
    )
    return count / elapsed_minutes


# --- per-entry metrics -------------------------------------------------------

def count_chained(entry: str) -> int:
    """Number of commands in one submitted line: 1 + top-level ``;`` count.

    Semicolons inside single or double quotes do not split. Backslash escapes
    the next character except inside single quotes.
    """
    separators = 0
    in_single = False
    in_double = False
    escaped = False
    for ch in entry:
        if escaped:
            escaped = False
            continue
        if ch == "\\" and not in_single:
            escaped = True
        elif ch == "'" and not in_double:
            in_single = not in_single
        elif ch == '"' and not in_single:
            in_double = not in_double
        elif ch == ";" and not in_single and not in_double:
            separators += 1
    return 1 + separators


def cope(entries) -> float:
    """Mean commands per submitted entry. At least 1.0 by construction."""
    entries = list(entries)
    if not entries:
        raise ValueError("need at least one entry")
    return sum(count_chained(e) for e in entries) / len(entries)


def command_head(entry: str) -> str:
    """First whitespace-separated token of a line."""
    parts = entry.split()
    return parts[0] if parts else ""


def consistency(entries) -> float:
    """1 - distinct_heads/total: 0 when every head differs, near 1 when the
    player hammers one command."""
    entries = list(entries)
    if not entries:
        raise ValueError("need at least one entry")
    heads = {command_head(e) for e in entries}
    return 1.0 - len(heads) / len(entries)


def hamming_distance(a: str, b: str) -> int:
    """Count of positions where two equal-length strings differ."""
    if len(a) != len(b):
        raise ValueError("Unequal length")
    return sum(ch_a != ch_b for ch_a, ch_b in zip(a, b))


# --- command validity --------------------------------------------------------

DEFAULT_COMMAND_HEADS = frozenset({
    # shell staples
    "ls", "cd", "pwd", "cat", "echo", "grep", "find", "head", "tail", "sort",
    "uniq", "wc", "sed", "awk", "cut", "tr", "chmod", "chown", "cp", "mv",
    "rm", "mkdir", "touch", "which", "man", "history", "clear", "exit",
    "python", "python3", "bash", "sh", "sudo", "vi", "vim", "nano", "kill",
    "ps", "top", "id", "whoami", "uname", "env", "export", "ifconfig", "ip",
    "netstat", "ss", "service", "systemctl", "crontab", "scp", "ssh", "ftp",
    "telnet", "nc", "ncat", "netcat", "curl", "wget", "tar", "unzip", "gzip",
    # recon / scanning / attack tooling
    "ping", "traceroute", "whois", "dig", "nslookup", "host", "nmap",
    "masscan", "nikto", "dirb", "gobuster", "wfuzz", "hydra", "medusa",
    "john", "hashcat", "sqlmap", "msfconsole", "msfvenom", "searchsploit",
    "tcpdump", "wireshark", "tshark", "aircrack-ng", "hping3", "arpspoof",
    "ettercap", "responder", "enum4linux", "smbclient", "rpcclient",
    "snmpwalk", "xfreerdp", "evil-winrm", "theharvester", "recon-ng",
    "shred", "wevtutil", "unset",
    # match client verbs
    "probe", "exploit", "capture", "flag", "report", "press",
})


@dataclass(frozen=True)
class CommandGrammar:
    """Validity check for submitted lines: every top-level segment must start
    with a known head and contain only printable text."""

    heads: frozenset = field(default_factory=lambda: DEFAULT_COMMAND_HEADS)

    def is_valid(self, entry: str) -> bool:
        if not entry.strip():
            return False
        if any(ord(ch) < 32 and ch != "\t" for ch in entry):
            return False
        segments = split_top_level(entry)
        segments = [s for s in segments if s.strip()]
        if not segments:
            return False
        return all(command_head(s) in self.heads for s in segments)


def split_top_level(entry: str) -> list[str]:
    """Split a line on top-level semicolons, same quoting rules as
    count_chained."""
    parts = []
    current = []
    in_single = False
    in_double = False
    escaped = False
    for ch in entry:
        if escaped:
            current.append(ch)
            escaped = False
            continue
        if ch == "\\" and not in_single:
            escaped = True
            current.append(ch)
        elif ch == "'" and not in_double:
            in_single = not in_single
            current.append(ch)
        elif ch == '"' and not in_single:
            in_double = not in_double
            current.append(ch)
        elif ch == ";" and not in_single and not in_double:
            parts.append("".join(current))
            current = []
        else:
            current.append(ch)
    parts.append("".join(current))
    return parts


# --- snapshots ---------------------------------------------------------------

@dataclass(frozen=True)
class MetricsSnapshot:
    """Metrics for one player at one instant."""

    player: str
    at: float
    copm: float = 0.0
    copm_sliding: float = 0.0
    cpm: float = 0.0
    epm: float = 0.0
    cope: float = 0.0
    consistency: float = 0.0
    commands: int = 0
    keystrokes: int = 0

    def as_dict(self) -> dict:
        return {
            "copm": self.copm,
            "copm_sliding": self.copm_sliding,
            "cpm": self.cpm,
            "epm": self.epm,
            "cope": self.cope,
            "consistency": self.consistency,
            "commands": self.commands,
            "keystrokes": self.keystrokes,
        }


def snapshot(events, player: str, now: float, started_at: float) -> MetricsSnapshot:
    """Compute all metrics for one player from a mixed event stream."""
    mine = [e for e in events if e.player == player]
    elapsed_minutes = (now - started_at) / 60.0
    entries = [e.text for e in mine if e.kind == EventKind.COMMAND]
    n_keys = sum(1 for e in mine if e.kind == EventKind.KEYSTROKE)
    n_cmds = sum(1 for e in mine if e.kind == EventKind.COMMAND and e.valid)
    if elapsed_minutes <= 0:
        return MetricsSnapshot(player=player, at=now, commands=n_cmds, keystrokes=n_keys)
    return MetricsSnapshot(
        player=player,
        at=now,
        copm=copm_total(mine, elapsed_minutes),
        copm_sliding=copm_window(mine, now),
        cpm=cpm(mine, elapsed_minutes),
        epm=epm(mine, elapsed_minutes),
        cope=cope(entries) if entries else 0.0,
        consistency=consistency(entries) if entries else 0.0,
        commands=n_cmds,
        keystrokes=n_keys,
    )


# --- event log persistence ----------------------------------------------------

def write_event_log(path, events) -> int:
    """Append events to an ndjson log; returns the number written."""
    count = 0
    with open(path, "a", encoding="ascii") as fh:
        for event in events:
            fh.write(protocol.canonical_dumps(event.to_payload()) + "\n")
            count += 1
    return count


def read_event_log(path) -> list[CommandEvent]:
    events = []
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = protocol.canonical_decode(line.encode("ascii"))
            except (UnicodeEncodeError, DecodeError) as exc:
                raise DecodeError(f"line {line_no}: {exc}") from exc
            if not isinstance(payload, dict):
                raise DecodeError(f"line {line_no}: not an object")
            events.append(CommandEvent.from_payload(payload))
    return events
