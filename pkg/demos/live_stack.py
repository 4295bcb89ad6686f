"""The whole stack over real sockets on localhost.

One game server behind a TCP frontend, two clients registering and
playing, and the browser bridge serving the same game over a websocket.
The tiny websocket client at the bottom is just enough protocol to read
the first score frame a browser would get.
"""

import base64
import json
import os
import socket
import time

from hackmatch.bridge import ScoreboardBridge
from hackmatch.model import GameConfig
from hackmatch.net import GameNetServer, GameClient
from hackmatch.protocol import CaptureSubmission, StatusReport, UnitReport
from hackmatch.server import GameServer


def ws_read_first_text(host: str, port: int, path: str) -> dict:
    key = base64.b64encode(os.urandom(16)).decode()
    sock = socket.create_connection((host, port), timeout=5)
    sock.sendall((f"GET {path} HTTP/1.1\r\nHost: {host}\r\nUpgrade: websocket\r\n"
                  "Connection: Upgrade\r\nSec-WebSocket-Version: 13\r\n"
                  f"Sec-WebSocket-Key: {key}\r\n\r\n").encode())
    buf = b""
    while b"\r\n\r\n" not in buf:
        buf += sock.recv(4096)
    assert b" 101 " in buf.split(b"\r\n", 1)[0], "upgrade refused"
    frame = buf.split(b"\r\n\r\n", 1)[1]
    while len(frame) < 2:
        frame += sock.recv(4096)
    length = frame[1] & 0x7F
    header = 2 + (2 if length == 126 else 8 if length == 127 else 0)
    while len(frame) < header:
        frame += sock.recv(4096)
    if length == 126:
        length = int.from_bytes(frame[2:4], "big")
    elif length == 127:
        length = int.from_bytes(frame[2:10], "big")
    while len(frame) < header + length:
        frame += sock.recv(4096)
    sock.close()
    return json.loads(frame[header:header + length])


def main() -> None:
    game_server = GameServer()
    config = GameConfig(damage_constant=1.0, rng_seed=9)
    game_server.create_game(config, ["alice", "bob"], game_id="g-live")

    frontend = GameNetServer(game_server)
    frontend.start()
    bridge = ScoreboardBridge(game_server, port=0)
    bridge.start()
    print(f"game frontend on tcp/{frontend.port}, scoreboard bridge on tcp/{bridge.port}")

    alice = GameClient("127.0.0.1", frontend.port)
    bob = GameClient("127.0.0.1", frontend.port)
    try:
        alice.register_player("g-live", "alice")
        bob.register_player("g-live", "bob")
        alice.start_game("g-live")
        print("both players registered over TCP, game started")

        t0 = time.time()
        realm = bob.realm_info("g-live", "bob")
        bob.handle_status_report("g-live", StatusReport(
            timestamp=t0, ip="127.0.0.1", player_name="bob",
            units=tuple(UnitReport(code=200, id=u["id"], health=u["health"],
                                   port=u["port"]) for u in realm.units),
        ))

        # in a real match the fingerprint comes out of the exploited unit;
        # here we cheat and read it from bob's own realm view
        stolen = realm.units[0]["fingerprint"]
        verdict = alice.handle_capture("g-live", CaptureSubmission(
            attacker="alice", claimed_fingerprint=stolen, timestamp=time.time()))
        print(f"alice's capture over TCP: accepted={verdict.accepted} ({verdict.reason})")

        score = ws_read_first_text("127.0.0.1", bridge.port, "/ws/game/g-live")
        print(f"\nwebsocket snapshot, as a browser would see it:")
        print(f"  type={score['type']}  phase={score['phase']}  tick={score['tick']}")
        for name, p in sorted(score["players"].items()):
            units = " ".join(f"{u['health']:.0f}" for u in p["units"])
            print(f"  {name:<6} total={p['health_sum']:6.1f}  units: {units}")
    finally:
        alice.close()
        bob.close()
        bridge.stop()
        frontend.stop()
    print("\nall sockets closed")


if __name__ == "__main__":
    main()
