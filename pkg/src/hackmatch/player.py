"""Player-side agent: hosts mock vulnerable units, probes them, reports.

A mock unit is a tiny line-oriented TCP service standing in for a real
vulnerable box. It answers PING with PONG (liveness), EXPLOIT <key> with
FLAG <fingerprint> when the key matches its class vulnerability (anything
else gets DENIED), and KILL by saying BYE and shutting down. Availability is
the whole game: scoring only cares whether the service answers.

The daemon owns one realm of units, probes them every report interval, and
publishes a status report. It also exposes the player verbs: fetch opponent
address, list own flags, enter a unit, submit a capture, fire an attack
template at a target.

Attack surfaces are pluggable: TcpSurface speaks to real sockets,
VirtualSurface to an in-memory service map, so full matches can run without
opening a single port.
"""

import logging
import os
import secrets
import socket
import threading

from .metrics import CommandEvent, EventKind
from .protocol import CaptureSubmission, StatusReport, UnitReport

log = logging.getLogger("hackmatch.player")

PROBE_TIMEOUT = 0.25
LIVENESS = b"PING\n"

ATTACK_TEMPLATES = ("liveness-flood", "kill-request", "key-guess")


class MockUnitService:
    """Stub vulnerable service bound to one port.

    hang=True accepts connections but never answers, for probe-timeout tests.
    """

    def __init__(self, port: int, fingerprint: str, vuln_key: str,
                 host: str = "127.0.0.1", hang: bool = False):
        self.fingerprint = fingerprint
        self.vuln_key = vuln_key
        self.hang = hang
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen(8)
        self.host, self.port = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()

    @property
    def running(self) -> bool:
        return not self._stop.is_set()

    def _serve(self) -> None:
        self._sock.settimeout(0.1)
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            threading.Thread(target=self._handle, args=(conn,), daemon=True).start()
        try:
            self._sock.close()
        except OSError:
            pass

    def _handle(self, conn: socket.socket) -> None:
        with conn:
            if self.hang:
                self._stop.wait(5.0)
                return
            conn.settimeout(2.0)
            try:
                data = conn.recv(1024)
            except OSError:
                return
            line = data.decode("ascii", "replace").strip()
            if line == "PING":
                reply = b"PONG\n"
            elif line == "KILL":
                reply = b"BYE\n"
            elif line == "EXPLOIT" or line.startswith("EXPLOIT "):
                key = line.split(" ", 1)[1] if " " in line else ""
                if key == self.vuln_key:
                    reply = f"FLAG {self.fingerprint}\n".encode("ascii")
                else:
                    reply = b"DENIED\n"
            else:
                reply = b"ERR\n"
            try:
                conn.sendall(reply)
            except OSError:
                pass
            if line == "KILL":
                self.shutdown()

    def shutdown(self) -> None:
        self._stop.set()


class MockUnit:
    """One hosted game piece: the running service plus its secret material."""

    def __init__(self, unit_id: str, port: int, fingerprint: str, vuln_key: str,
                 flag_dir: str, host: str = "127.0.0.1", hang: bool = False):
        self.unit_id = unit_id
        self.vuln_key = vuln_key
        os.makedirs(flag_dir, exist_ok=True)
        self.flag_file = os.path.join(flag_dir, f"{unit_id}.flag")
        with open(self.flag_file, "w", encoding="ascii") as fh:
            fh.write(fingerprint)
        self.process = MockUnitService(port, fingerprint, vuln_key, host=host, hang=hang)
        self.port = self.process.port
        self.host = self.process.host

    @property
    def fingerprint(self) -> str:
        with open(self.flag_file, encoding="ascii") as fh:
            return fh.read().strip()

    def kill(self) -> None:
        self.process.shutdown()


# --- attack surfaces -----------------------------------------------------------

def _tcp_exchange(host: str, port: int, line: str, timeout: float) -> str | None:
    """One request/response round trip; None when the service is unreachable
    or silent."""
    try:
        with socket.create_connection((host, port), timeout=timeout) as conn:
            conn.settimeout(timeout)
            conn.sendall(line.encode("ascii") + b"\n")
            data = conn.recv(1024)
    except OSError:
        return None
    if not data:
        return None
    return data.decode("ascii", "replace").strip()


class TcpSurface:
    """Real-socket probing and attacking."""

    def __init__(self, timeout: float = PROBE_TIMEOUT):
        self.timeout = timeout

    def probe(self, host: str, port: int) -> int:
        reply = _tcp_exchange(host, port, "PING", self.timeout)
        return 200 if reply is not None else 400

    def exploit(self, host: str, port: int, key: str) -> str:
        reply = _tcp_exchange(host, port, f"EXPLOIT {key}", self.timeout)
        return reply if reply is not None else "DOWN"

    def kill(self, host: str, port: int) -> str:
        reply = _tcp_exchange(host, port, "KILL", self.timeout)
        return reply if reply is not None else "DOWN"


class VirtualService:
    """In-memory stand-in for one mock unit."""

    def __init__(self, fingerprint: str, vuln_key: str, up: bool = True):
        self.fingerprint = fingerprint
        self.vuln_key = vuln_key
        self.up = up


class VirtualSurface:
    """Socket-free service map keyed by (host, port); lets simulations run
    whole matches in one process with zero network I/O."""

    def __init__(self):
        self.services: dict[tuple[str, int], VirtualService] = {}

    def add(self, host: str, port: int, fingerprint: str, vuln_key: str,
            up: bool = True) -> VirtualService:
        svc = VirtualService(fingerprint, vuln_key, up=up)
        self.services[(host, port)] = svc
        return svc

    def probe(self, host: str, port: int) -> int:
        svc = self.services.get((host, port))
        return 200 if svc is not None and svc.up else 400

    def exploit(self, host: str, port: int, key: str) -> str:
        svc = self.services.get((host, port))
        if svc is None or not svc.up:
            return "DOWN"
        return f"FLAG {svc.fingerprint}" if key == svc.vuln_key else "DENIED"

    def kill(self, host: str, port: int) -> str:
        svc = self.services.get((host, port))
        if svc is None or not svc.up:
            return "DOWN"
        svc.up = False
        return "BYE"


def probe_unit(unit, surface=None) -> int:
    """Liveness check: 200 when the service answers in time, else 400."""
    surface = surface if surface is not None else TcpSurface()
    return surface.probe(unit.host, unit.port)


# --- the daemon ------------------------------------------------------------------


class PlayerDaemon:
    """One player's agent.

    ``server`` is anything with the game-server op surface (the in-process
    GameServer or a network client proxy). ``surface`` is where probes and
    attacks land. Real units are hosted only when ``host_units`` is true;
    otherwise the daemon probes whatever the surface knows about its ports.
    """

    def __init__(self, server, game_id: str, name: str, surface=None,
                 flag_dir: str | None = None, host: str = "127.0.0.1",
                 host_units: bool = True, clock=None):
        self.server = server
        self.game_id = game_id
        self.name = name
        self.host = host
        self.surface = surface if surface is not None else TcpSurface()
        self.flag_dir = flag_dir or os.path.join(".hackmatch-flags", name)
        self.clock = clock if clock is not None else __import__("time").time
        self._host_units = host_units
        self.units: dict[str, MockUnit] = {}
        self.realm: tuple = ()
        self.opponent = ""
        self.known_health: dict[str, float] = {}
        self._report_count = 0
        self._lock = threading.Lock()

    # -- lifecycle --

    def register(self):
        ack = self.server.register_player(self.game_id, self.name, host=self.host,
                                          now=self.clock())
        if not ack.ok:
            raise RuntimeError(f"registration refused: {ack.reason}")
        self.opponent = ack.opponent
        info = self.server.realm_info(self.game_id, self.name)
        self.realm = info.units
        for u in info.units:
            self.known_health[u["id"]] = u["health"]
            if self._host_units:
                self.units[u["id"]] = MockUnit(
                    u["id"], u["port"], u["fingerprint"], u["vuln_key"],
                    flag_dir=self.flag_dir, host=self.host,
                )
        return ack

    def shutdown(self) -> None:
        for unit in self.units.values():
            unit.kill()

    # -- probing and reporting --

    def probe_all(self) -> dict[str, int]:
        """Probe every owned unit concurrently; unit_id -> status code."""
        codes: dict[str, int] = {}
        threads = []

        def one(uid: str, port: int) -> None:
            codes[uid] = self.surface.probe(self.host, port)

        for u in self.realm:
            t = threading.Thread(target=one, args=(u["id"], u["port"]), daemon=True)
            t.start()
            threads.append(t)
        for t in threads:
            t.join()
        return codes

    def build_status_report(self, now: float | None = None,
                            codes: dict[str, int] | None = None) -> StatusReport:
        now = self.clock() if now is None else now
        codes = self.probe_all() if codes is None else codes
        units = tuple(
            UnitReport(
                code=codes.get(u["id"], 400),
                id=u["id"],
                health=self.known_health.get(u["id"], 0.0),
                port=u["port"],
            )
            for u in self.realm
        )
        return StatusReport(
            timestamp=now,
            ip=self.host,
            player_name=self.name,
            cmds={"reports": self._report_count},
            units=units,
        )

    def report_once(self, now: float | None = None):
        report = self.build_status_report(now=now)
        state = self.server.handle_status_report(self.game_id, report,
                                                 received_at=report.timestamp)
        self._report_count += 1
        return state

    def observe_score(self, update) -> None:
        """Track server-truth healths from a score update."""
        mine = update.players.get(self.name, {})
        for u in mine.get("units", ()):
            self.known_health[u["id"]] = u["health"]

    # -- player verbs --

    def get_opponent_ip(self) -> str:
        info = self.server.opponent_info(self.game_id, self.name)
        return info.host

    def get_flags(self) -> list[str]:
        """Own fingerprints only. Opponent secrets are never readable here:
        the server scopes realm_info to the requesting player."""
        if self.units:
            return [self.units[u["id"]].fingerprint for u in self.realm]
        return [u["fingerprint"] for u in self.realm]

    def enter_unit(self, unit_id: str) -> str:
        for u in self.realm:
            if u["id"] == unit_id:
                alive = self.known_health.get(unit_id, 0.0) > 0
                hosted = self.units.get(unit_id)
                if hosted is not None and not hosted.process.running:
                    alive = False
                if not alive:
                    raise ValueError(f"unit {unit_id} is down")
                return f"sess-{unit_id}-{secrets.token_hex(4)}"
        raise KeyError(f"not our unit: {unit_id}")

    def capture_unit(self, claimed: str, now: float | None = None) -> bool:
        now = self.clock() if now is None else now
        verdict = self.server.handle_capture(
            self.game_id,
            CaptureSubmission(attacker=self.name, claimed_fingerprint=claimed,
                              timestamp=now),
            now=now,
        )
        if not verdict.accepted:
            log.info("%s capture rejected: %s", self.name, verdict.reason)
        return verdict.accepted

    def attack_unit(self, target_port: int, template_name: str,
                    target_host: str | None = None, key: str | None = None) -> str:
        if template_name not in ATTACK_TEMPLATES:
            raise ValueError(f"unknown template {template_name!r}")
        host = target_host if target_host is not None else self.get_opponent_ip()
        if template_name == "liveness-flood":
            answers = sum(1 for _ in range(5) if self.surface.probe(host, target_port) == 200)
            return f"flood {answers}/5 answered"
        if template_name == "kill-request":
            return self.surface.kill(host, target_port)
        # key-guess: keys are class properties, so studying one's own realm
        # yields the candidate list for the opponent's
        keys = [key] if key is not None else sorted({u["vuln_key"] for u in self.realm})
        last = "DENIED"
        for candidate in keys:
            last = self.surface.exploit(host, target_port, candidate)
            if last.startswith("FLAG "):
                return last
        return last

    def submit_command(self, text: str, valid: bool = True,
                       now: float | None = None) -> None:
        now = self.clock() if now is None else now
        self.server.handle_command_event(
            self.game_id,
            CommandEvent(player=self.name, timestamp=now,
                         kind=EventKind.COMMAND, text=text, valid=valid),
            now=now,
        )

    # -- live loop --

    def run(self, stop: threading.Event, interval: float) -> None:
        """Blocking report loop for live deployments; sim drives report_once
        directly instead."""
        while not stop.is_set():
            try:
                self.report_once()
            except (KeyError, ValueError) as exc:
                log.warning("%s report refused: %s", self.name, exc)
            except Exception:
                log.exception("%s report failed; retrying next interval", self.name)
            stop.wait(interval)
