"""Compute the command-stream skill metrics for a small synthetic session.

A session is a flat list of timestamped events: keystrokes (including
error keys) and submitted command lines. The panel below is what the
scoreboard derives from them.
"""

from hackmatch import metrics
from hackmatch.metrics import CommandEvent, EventKind

COMMANDS = [
    (5.0, "nmap -sV 10.0.0.2"),
    (20.0, "nikto -h 10.0.0.2; cat results.txt"),
    (42.0, "nmap -p- 10.0.0.2"),
    (66.0, "hydra -l admin -P words.txt 10.0.0.2 ssh"),
    (95.0, "bad command here"),
    (118.0, "echo 'a;b;c' > note.txt; wc -l note.txt; cat note.txt"),
]


def events_for(player: str):
    evs = []
    for t, line in COMMANDS:
        # keystrokes lead each submitted line; sprinkle in two corrections
        for i, ch in enumerate(line):
            evs.append(CommandEvent(player, t - 2.0 + i * 0.01, EventKind.KEYSTROKE, ch))
        evs.append(CommandEvent(player, t - 1.0, EventKind.KEYSTROKE, "Backspace"))
        evs.append(CommandEvent(player, t - 0.9, EventKind.KEYSTROKE, "Delete"))
        evs.append(CommandEvent(player, t, EventKind.COMMAND, line,
                                valid=line != "bad command here"))
    return evs


def main() -> None:
    events = events_for("alice")
    now, started = 120.0, 0.0
    panel = metrics.snapshot(events, "alice", now=now, started_at=started)

    print(f"session: {len(COMMANDS)} submitted lines, {len(events)} raw events, "
          "2 minutes\n(one line was rejected by the grammar: it counts for "
          "keystrokes but not commands/min)\n")
    print(f"  commands/min (whole session)  {panel.copm:6.2f}")
    print(f"  commands/min (last 10 s)      {panel.copm_sliding:6.2f}")
    print(f"  keystrokes/min                {panel.cpm:6.2f}")
    print(f"  error keys/min                {panel.epm:6.2f}")
    print(f"  avg commands per entry        {panel.cope:6.2f}")
    print(f"  head consistency              {panel.consistency:6.2f}")

    print("\nchaining: each top-level ';' adds one command to the entry")
    for entry in ("ls", "a; b", "echo 'a;b;c' > f; wc -l f; cat f"):
        print(f"  {metrics.count_chained(entry)}  {entry!r}")

    print("\nhamming distance (equal-length strings only):")
    pairs = [("nmap -sV", "nmap -sT"), ("10.0.0.2", "10.0.0.7"), ("aaaa", "aaaa")]
    for a, b in pairs:
        print(f"  {metrics.hamming_distance(a, b)}  {a!r} vs {b!r}")
    try:
        metrics.hamming_distance("short", "longer")
    except ValueError as exc:
        print(f"  unequal lengths raise: {exc}")


if __name__ == "__main__":
    main()
