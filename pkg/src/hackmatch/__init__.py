"""hackmatch: a head-to-head hacking match engine.

Two players (human or bot) each defend a realm of mock vulnerable services
while attacking the opponent's. The game server is the single source of
truth: it scores availability by health decay, accepts fingerprint captures
as proof of exploitation, enforces objective/time/speed victory rules,
streams live metrics, and can optionally anchor every transition in a
hash-chained ledger.
"""

from . import (  # noqa: F401
    bot,
    bus,
    charmodel,
    health,
    ledger,
    metrics,
    model,
    net,
    player,
    protocol,
    server,
    sim,
)
from .model import GameConfig, GameMode, GamePhase, GameState  # noqa: F401
from .server import GameServer  # noqa: F401

__version__ = "0.1.0"
