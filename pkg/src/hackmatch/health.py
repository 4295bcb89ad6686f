"""Health decay engine.

A unit that fails its liveness probes is "down" and bleeds health at the
damage constant: after s seconds of downtime a unit that had ch health is at
ch - s*dc, clamped at zero. Health is a ratchet; patching a service stops
the bleeding but never restores points (a reshuffle is the only way to get a
fresh unit).
"""

from dataclasses import dataclass, replace

from .model import GamePhase, GameState, find_player, game_units, with_health


@dataclass(frozen=True)
class DownSet:
    """Units that failed their probe for the tick being applied."""

    tick: int
    unit_ids: frozenset[str]

    def __post_init__(self):
        if self.tick < 0:
            raise ValueError("tick must be >= 0")


def unit_health(ch: float, s: float, dc: float) -> float:
    """Health after s seconds of downtime: max(0, ch - s*dc)."""
    if s < 0:
        raise ValueError("seconds down must be >= 0")
    if dc <= 0:
        raise ValueError("damage constant must be > 0")
    return max(0.0, ch - s * dc)


def apply_tick(state: GameState, down: DownSet, dt_seconds: float) -> GameState:
    """One scoring tick: charge dt_seconds of downtime to every down unit.

    Units not in the down set are untouched. Returns a new snapshot with
    the tick counter advanced and alive flags kept consistent.
    """
    if dt_seconds <= 0:
        raise ValueError("dt_seconds must be > 0")
    if state.phase is not GamePhase.RUNNING:
        raise ValueError(f"game {state.game_id} is not running")

    known = {u.unit_id for u in game_units(state)}
    unknown = down.unit_ids - known
    if unknown:
        raise KeyError(f"unknown unit ids in down set: {sorted(unknown)}")

    dc = state.config.damage_constant
    players = []
    for p in state.players:
        units = tuple(
            with_health(u, unit_health(u.health, dt_seconds, dc), status_code=400)
            if u.unit_id in down.unit_ids
            else u
            for u in p.realm.units
        )
        players.append(replace(p, realm=replace(p.realm, units=units)))
    return replace(state, players=tuple(players), tick=state.tick + 1)


def is_defeated(state: GameState, player: str) -> bool:
    """Last-hacker-alive rule: defeated once every unit is at zero health."""
    p = find_player(state, player)  # raises KeyError for unknown players
    return all(u.health <= 0 for u in p.realm.units)


def destroyed_fraction(state: GameState, player: str) -> float:
    """Share of a player's units at zero health, for threshold victory rules."""
    p = find_player(state, player)
    dead = sum(1 for u in p.realm.units if u.health <= 0)
    return dead / len(p.realm.units)


def health_sum(state: GameState, player: str) -> float:
    """Sum of unit healths, the time-mode score."""
    p = find_player(state, player)
    return sum(u.health for u in p.realm.units)


def alive_count(state: GameState, player: str) -> int:
    p = find_player(state, player)
    return sum(1 for u in p.realm.units if u.alive)
