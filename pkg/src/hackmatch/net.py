"""Framed-TCP front end for the game server, plus the matching client.

One socket per party. A connection becomes player-bound after a successful
RegisterPlayer, which also starts pushing that player's score, events and
opponent channels down the wire. Realm secrets are only ever answered on the
connection that registered the owning player; a socket asking about someone
else's realm gets an error, not a fingerprint.

The client presents the same method names the in-process GameServer has, so
daemons and bots do not care whether their server is an object or a socket.
"""

import itertools
import logging
import queue
import socket
import threading
import time
from dataclasses import replace

from . import protocol
from .metrics import CommandEvent
from .protocol import (
    CaptureSubmission,
    CaptureVerdict,
    ErrorMessage,
    FrameDecoder,
    GameControl,
    GameEvent,
    OpponentInfo,
    OpponentInfoRequest,
    RealmInfo,
    RealmInfoRequest,
    Registered,
    RegisterPlayer,
    ScoreUpdate,
    StatusReport,
)

log = logging.getLogger("hackmatch.net")


def _send(sock: socket.socket, lock: threading.Lock, msg) -> bool:
    data = protocol.encode(msg)
    try:
        with lock:
            sock.sendall(data)
        return True
    except OSError:
        return False


class GameNetServer:
    """Accepts framed-message connections and forwards ops to a GameServer."""

    def __init__(self, game_server, host: str = "127.0.0.1", port: int = 0):
        self.game_server = game_server
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(16)
        self._listener.settimeout(0.2)
        self.host, self.port = self._listener.getsockname()
        self._stop = threading.Event()
        self._conns: set[socket.socket] = set()
        self._conns_lock = threading.Lock()
        self._accept_thread: threading.Thread | None = None
        self._ticker_thread: threading.Thread | None = None

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> "GameNetServer":
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self

    def start_ticker(self, interval: float = 0.25) -> None:
        """Advance every hosted game on wall time. Live mode only; tests and
        sims drive virtual time themselves."""

        def tick():
            while not self._stop.wait(interval):
                for game_id in self.game_server.game_ids():
                    try:
                        self.game_server.advance_time(game_id, now=time.time())
                    except KeyError:
                        pass

        self._ticker_thread = threading.Thread(target=tick, daemon=True)
        self._ticker_thread.start()

    def stop(self) -> None:
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._conns_lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.close()
            except OSError:
                pass

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            with self._conns_lock:
                self._conns.add(conn)
            threading.Thread(target=self._serve_conn, args=(conn, addr), daemon=True).start()

    def _serve_conn(self, conn: socket.socket, addr) -> None:
        decoder = FrameDecoder()
        send_lock = threading.Lock()
        subs = []
        bound: tuple[str, str] | None = None  # (game_id, player)
        pump_stop = threading.Event()

        def reply(msg) -> None:
            _send(conn, send_lock, msg)

        def pump(sub) -> None:
            while not pump_stop.is_set():
                item = sub.get(timeout=0.2)
                if item is None:
                    continue
                _topic, msg = item
                if not _send(conn, send_lock, msg):
                    return

        try:
            conn.settimeout(0.2)
            while not self._stop.is_set():
                try:
                    data = conn.recv(65536)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not data:
                    break
                try:
                    payloads = decoder.feed(data)
                    messages = [protocol.decode_payload(p) for p in payloads]
                except protocol.DecodeError as exc:
                    reply(ErrorMessage(reason=str(exc), field_name=exc.field))
                    break
                for msg in messages:
                    bound = self._dispatch(msg, bound, reply, subs, pump, pump_stop)
        finally:
            pump_stop.set()
            for sub in subs:
                self.game_server.bus.unsubscribe(sub)
            with self._conns_lock:
                self._conns.discard(conn)
            try:
                conn.close()
            except OSError:
                pass

    def _dispatch(self, msg, bound, reply, subs, pump, pump_stop):
        server = self.game_server
        txn = getattr(msg, "txn", "")

        def answer(out) -> None:
            # direct replies echo the request's correlation tag so the client
            # can tell them apart from channel pushes of the same type
            if txn and hasattr(out, "txn"):
                out = replace(out, txn=txn)
            reply(out)

        try:
            if isinstance(msg, RegisterPlayer):
                ack = server.register_player(msg.game_id, msg.player, host=msg.host)
                # subscribe before acking so no push can slip past between
                # the ack and the subscription
                if ack.ok and bound is None:
                    bound = (msg.game_id, msg.player)
                    for channel in ("score", "events", "opponent"):
                        pattern = f"game/{msg.game_id}/player/{msg.player}/{channel}"
                        sub = server.bus.subscribe(pattern)
                        subs.append(sub)
                        threading.Thread(target=pump, args=(sub,), daemon=True).start()
                answer(ack)
                return bound
            if isinstance(msg, StatusReport):
                if bound is None:
                    answer(ErrorMessage(reason="register first"))
                    return bound
                server.handle_status_report(bound[0], msg, received_at=time.time())
                return bound
            if isinstance(msg, CaptureSubmission):
                if bound is None:
                    answer(ErrorMessage(reason="register first"))
                    return bound
                answer(server.handle_capture(bound[0], msg, now=time.time()))
                return bound
            if isinstance(msg, CommandEvent):
                if bound is None:
                    answer(ErrorMessage(reason="register first"))
                    return bound
                server.handle_command_event(bound[0], msg, now=time.time())
                return bound
            if isinstance(msg, GameControl):
                now = time.time()
                if msg.op == "start":
                    server.start_game(msg.game_id, now=now)
                elif msg.op == "pause":
                    server.pause_game(msg.game_id, now=now)
                elif msg.op == "resume":
                    server.resume_game(msg.game_id, now=now)
                else:
                    server.clock_press(msg.game_id, msg.player, now=now)
                answer(server.score_update(msg.game_id, now=now))
                return bound
            if isinstance(msg, OpponentInfoRequest):
                answer(server.opponent_info(msg.game_id, msg.player))
                return bound
            if isinstance(msg, RealmInfoRequest):
                if bound != (msg.game_id, msg.player):
                    log.warning("realm request for %s refused on connection bound to %s",
                                msg.player, bound)
                    answer(ErrorMessage(reason="realm info is owner-only"))
                    return bound
                answer(server.realm_info(msg.game_id, msg.player))
                return bound
            answer(ErrorMessage(reason=f"unexpected message type {type(msg).__name__}"))
        except (KeyError, ValueError) as exc:
            reason = str(exc.args[0]) if exc.args else str(exc)
            answer(ErrorMessage(reason=reason))
        return bound


class RequestError(RuntimeError):
    """Server answered a request with an error message."""


class GameClient:
    """Socket proxy with the GameServer's op surface.

    Pushed score/event/opponent messages land in ``updates``; request
    methods block for their reply, matched by the correlation tag the
    server echoes back (pushes share the socket and the message types).
    ``now``/``received_at`` arguments are accepted for interface parity
    and ignored: the server stamps receive times itself, exactly because
    clients may lie.
    """

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.timeout = timeout
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.settimeout(0.2)
        self._send_lock = threading.Lock()
        self._call_lock = threading.Lock()
        self._txn = itertools.count(1)
        self._inbox: queue.Queue = queue.Queue()
        self.updates: list = []
        self._updates_lock = threading.Lock()
        self._closed = threading.Event()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def close(self) -> None:
        self._closed.set()
        try:
            self._sock.close()
        except OSError:
            pass

    def _read_loop(self) -> None:
        decoder = FrameDecoder()
        while not self._closed.is_set():
            try:
                data = self._sock.recv(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            if not data:
                break
            try:
                for payload in decoder.feed(data):
                    self._inbox.put(protocol.decode_payload(payload))
            except protocol.DecodeError as exc:
                log.warning("undecodable push from server: %s", exc)
                break

    def _post(self, msg) -> None:
        if not _send(self._sock, self._send_lock, msg):
            raise ConnectionError("server connection lost")

    def _call(self, msg, want: tuple):
        with self._call_lock:
            txn = f"c{next(self._txn)}"
            self._post(replace(msg, txn=txn))
            deadline = time.monotonic() + self.timeout
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise TimeoutError(f"no {want} reply within {self.timeout}s")
                try:
                    got = self._inbox.get(timeout=remaining)
                except queue.Empty:
                    raise TimeoutError(f"no {want} reply within {self.timeout}s") from None
                if getattr(got, "txn", "") != txn:
                    # a push, or a stray reply to a dead request: not ours
                    with self._updates_lock:
                        self.updates.append(got)
                    continue
                if isinstance(got, ErrorMessage):
                    raise RequestError(got.reason)
                if isinstance(got, want):
                    return got
                raise RequestError(f"reply has unexpected type {type(got).__name__}")

    def poll_update(self):
        """Drain one pushed message (score/event/opponent), newest-last."""
        while True:
            try:
                got = self._inbox.get_nowait()
            except queue.Empty:
                break
            with self._updates_lock:
                self.updates.append(got)
        with self._updates_lock:
            return self.updates.pop(0) if self.updates else None

    # -- GameServer surface --

    def register_player(self, game_id: str, name: str, host: str = "127.0.0.1",
                        now=None) -> Registered:
        return self._call(RegisterPlayer(game_id=game_id, player=name, host=host),
                          (Registered,))

    def realm_info(self, game_id: str, player: str) -> RealmInfo:
        return self._call(RealmInfoRequest(game_id=game_id, player=player), (RealmInfo,))

    def opponent_info(self, game_id: str, player: str) -> OpponentInfo:
        return self._call(OpponentInfoRequest(game_id=game_id, player=player),
                          (OpponentInfo,))

    def handle_status_report(self, game_id: str, report: StatusReport,
                             received_at=None) -> None:
        self._post(report)

    def handle_capture(self, game_id: str, sub: CaptureSubmission, now=None) -> CaptureVerdict:
        return self._call(sub, (CaptureVerdict,))

    def handle_command_event(self, game_id: str, event: CommandEvent, now=None) -> None:
        self._post(event)

    def _control(self, game_id: str, op: str, player: str = "") -> ScoreUpdate:
        return self._call(GameControl(game_id=game_id, op=op, player=player),
                          (ScoreUpdate,))

    def start_game(self, game_id: str, now=None) -> ScoreUpdate:
        return self._control(game_id, "start")

    def pause_game(self, game_id: str, now=None) -> ScoreUpdate:
        return self._control(game_id, "pause")

    def resume_game(self, game_id: str, now=None) -> ScoreUpdate:
        return self._control(game_id, "resume")

    def clock_press(self, game_id: str, player: str, now=None) -> ScoreUpdate:
        return self._control(game_id, "clock_press", player=player)


def parse_address(text: str, default_port: int = 7777) -> tuple[str, int]:
    """'host:port' or 'host' or ':port' to a (host, port) pair."""
    if ":" in text:
        host, _, port = text.rpartition(":")
        return host or "127.0.0.1", int(port)
    return text or "127.0.0.1", default_port
