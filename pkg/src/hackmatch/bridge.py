"""Browser-facing bridge: static assets plus a live game websocket.

``GET /ws/game/{id}`` upgrades to a websocket that first delivers the
current score snapshot and then streams every score update and game
event, one canonical JSON object per text frame, using the same payload
schema as the wire protocol. Inbound frames carry operator controls
(start, pause, resume, clock_press) and are answered with a fresh score
snapshot or an error payload; nothing else is accepted, in particular
nothing that would leak realm secrets to an unauthenticated socket.
Every other request is a plain HTTP GET served from the configured
static directory.

The frame layer is hand-rolled RFC 6455 with no extensions and no
subprotocols. Client frames must be masked, server frames never are.
"""

import base64
import hashlib
import logging
import os
import socket
import struct
import threading
import urllib.parse
from dataclasses import replace

from .protocol import (
    DecodeError,
    ErrorMessage,
    GameControl,
    GameEvent,
    ScoreUpdate,
    decode_payload,
    message_bytes,
)

log = logging.getLogger(__name__)

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
WS_PATH_PREFIX = "/ws/game/"
MAX_HTTP_HEAD = 16 * 1024
MAX_INBOUND = 1 << 20  # operator ops are tiny; anything huge is hostile

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".txt": "text/plain; charset=utf-8",
    ".woff2": "font/woff2",
}


class SocketClosed(Exception):
    pass


class FrameError(Exception):
    """Peer violated the framing rules; the connection is unusable."""


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise SocketClosed()
        buf += chunk
    return bytes(buf)


def make_frame(opcode: int, payload: bytes) -> bytes:
    head = bytearray([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head.append(n)
    elif n < 1 << 16:
        head.append(126)
        head += struct.pack(">H", n)
    else:
        head.append(127)
        head += struct.pack(">Q", n)
    return bytes(head) + payload


def read_frame(sock: socket.socket) -> tuple[bool, int, bytes]:
    """One raw frame from a client: (fin, opcode, unmasked payload)."""
    b0, b1 = _recv_exact(sock, 2)
    if b0 & 0x70:
        raise FrameError("reserved bits set without a negotiated extension")
    fin = bool(b0 & 0x80)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if opcode >= OP_CLOSE and (not fin or n > 125):
        raise FrameError("control frames must be short and unfragmented")
    if n == 126:
        n = struct.unpack(">H", _recv_exact(sock, 2))[0]
    elif n == 127:
        n = struct.unpack(">Q", _recv_exact(sock, 8))[0]
    if n > MAX_INBOUND:
        raise FrameError(f"frame of {n} bytes exceeds the inbound limit")
    if not masked:
        raise FrameError("client frames must be masked")
    mask = _recv_exact(sock, 4)
    raw = _recv_exact(sock, n)
    return fin, opcode, bytes(b ^ mask[i % 4] for i, b in enumerate(raw))


def handshake_accept(key: str) -> str:
    digest = hashlib.sha1((key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _read_http_head(sock: socket.socket) -> bytes:
    buf = bytearray()
    while b"\r\n\r\n" not in buf:
        if len(buf) > MAX_HTTP_HEAD:
            raise FrameError("request head too large")
        chunk = sock.recv(4096)
        if not chunk:
            raise SocketClosed()
        buf += chunk
    return bytes(buf)


def _parse_request(head: bytes) -> tuple[str, str, dict]:
    text = head.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = text.split("\r\n")
    parts = lines[0].split(" ")
    if len(parts) != 3:
        raise FrameError(f"bad request line {lines[0]!r}")
    method, target = parts[0], parts[1]
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
    return method, target, headers


class ScoreboardBridge:
    """Serves the scoreboard's files and its live game stream."""

    def __init__(self, server, host: str = "127.0.0.1", port: int = 7788,
                 static_dir=None):
        self.server = server
        self.host = host
        self.port = port
        self.static_dir = os.path.realpath(str(static_dir)) if static_dir else None
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._stopping = threading.Event()
        self._lock = threading.Lock()
        self._conns: set = set()
        self._threads: list = []

    # -- lifecycle -------------------------------------------------------------------

    def start(self) -> "ScoreboardBridge":
        if self._listener is not None:
            raise RuntimeError("bridge already started")
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, self.port))
        sock.listen(32)
        sock.settimeout(0.2)
        self.port = sock.getsockname()[1]
        self._listener = sock
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="bridge-accept", daemon=True)
        self._accept_thread.start()
        log.info("scoreboard bridge listening on %s:%d", self.host, self.port)
        return self

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            conns = list(self._conns)
            threads = list(self._threads)
        for sock in conns:
            try:
                sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                sock.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=2.0)
        for t in threads:
            t.join(timeout=2.0)

    def _accept_loop(self) -> None:
        while not self._stopping.is_set():
            try:
                client, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            t = threading.Thread(target=self._serve, args=(client,),
                                 name="bridge-conn", daemon=True)
            with self._lock:
                self._conns.add(client)
                self._threads.append(t)
                self._threads = [x for x in self._threads if x.is_alive() or x is t]
            t.start()

    # -- per-connection --------------------------------------------------------------

    def _serve(self, sock: socket.socket) -> None:
        try:
            sock.settimeout(10.0)
            method, target, headers = _parse_request(_read_http_head(sock))
            path = urllib.parse.unquote(target.split("?", 1)[0])
            wants_ws = (headers.get("upgrade", "").lower() == "websocket"
                        and "upgrade" in headers.get("connection", "").lower())
            if path.startswith(WS_PATH_PREFIX) and wants_ws:
                self._serve_ws(sock, method, path, headers)
            else:
                self._serve_static(sock, method, path)
        except (SocketClosed, FrameError, OSError, UnicodeDecodeError):
            pass
        finally:
            with self._lock:
                self._conns.discard(sock)
            try:
                sock.close()
            except OSError:
                pass

    # -- static side -----------------------------------------------------------------

    def _serve_static(self, sock: socket.socket, method: str, path: str) -> None:
        def respond(status: str, body: bytes, ctype="text/plain; charset=utf-8"):
            head = (f"HTTP/1.1 {status}\r\n"
                    f"Content-Type: {ctype}\r\n"
                    f"Content-Length: {len(body)}\r\n"
                    "Connection: close\r\n\r\n")
            sock.sendall(head.encode("ascii") + (b"" if method == "HEAD" else body))

        if method not in ("GET", "HEAD"):
            respond("405 Method Not Allowed", b"method not allowed\n")
            return
        if self.static_dir is None:
            respond("404 Not Found", b"no static assets configured\n")
            return
        rel = path.lstrip("/") or "index.html"
        full = os.path.realpath(os.path.join(self.static_dir, rel))
        inside = full == self.static_dir or full.startswith(self.static_dir + os.sep)
        if not inside:
            respond("403 Forbidden", b"path escapes the static root\n")
            return
        if os.path.isdir(full):
            full = os.path.join(full, "index.html")
        if not os.path.isfile(full):
            respond("404 Not Found", b"not found\n")
            return
        with open(full, "rb") as fh:
            body = fh.read()
        ext = os.path.splitext(full)[1].lower()
        respond("200 OK", body, CONTENT_TYPES.get(ext, "application/octet-stream"))

    # -- websocket side --------------------------------------------------------------

    def _serve_ws(self, sock: socket.socket, method: str, path: str,
                  headers: dict) -> None:
        key = headers.get("sec-websocket-key", "")
        version = headers.get("sec-websocket-version", "")
        if method != "GET" or not key or version != "13":
            sock.sendall(b"HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n"
                         b"Connection: close\r\n\r\n")
            return
        sock.sendall((
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {handshake_accept(key)}\r\n\r\n"
        ).encode("ascii"))
        sock.settimeout(None)

        game_id = path[len(WS_PATH_PREFIX):]
        write_lock = threading.Lock()
        closed = threading.Event()

        def send_raw(frame: bytes) -> None:
            with write_lock:
                sock.sendall(frame)

        def send(msg) -> None:
            send_raw(make_frame(OP_TEXT, message_bytes(msg)))

        # subscribe before snapshotting so nothing can fall into the gap;
        # a stale score racing in right after the snapshot is harmless
        sub = self.server.bus.subscribe(f"game/{game_id}/player/+/+")
        try:
            snapshot = self.server.score_update(game_id)
        except KeyError:
            # bad game id: say so, close politely, let the UI show empty state
            self.server.bus.unsubscribe(sub)
            try:
                send(ErrorMessage(reason=f"unknown game {game_id!r}"))
                send_raw(make_frame(OP_CLOSE, struct.pack(">H", 1000)))
            except OSError:
                pass
            return

        send(snapshot)
        pump = threading.Thread(target=self._pump, args=(sub, send, closed),
                                name="bridge-pump", daemon=True)
        pump.start()
        try:
            self._reader_loop(sock, game_id, send, send_raw)
        finally:
            closed.set()
            self.server.bus.unsubscribe(sub)
            pump.join(timeout=1.0)

    def _pump(self, sub, send, closed: threading.Event) -> None:
        # score and game-scoped events are published once per player topic
        # with one shared object; consecutive-identity dedup drops the copies
        last = None
        while not closed.is_set() and not self._stopping.is_set():
            item = sub.get(timeout=0.25)
            if item is None:
                continue
            _, msg = item
            if msg is last:
                continue
            last = msg
            if not isinstance(msg, (ScoreUpdate, GameEvent)):
                continue
            try:
                send(msg)
            except OSError:
                closed.set()
                return

    def _reader_loop(self, sock, game_id: str, send, send_raw) -> None:
        frag_opcode = None
        frag_buf = bytearray()
        while not self._stopping.is_set():
            try:
                fin, opcode, payload = read_frame(sock)
            except (SocketClosed, OSError):
                return
            except FrameError as exc:
                try:
                    send_raw(make_frame(OP_CLOSE, struct.pack(">H", 1002)
                                        + str(exc).encode()[:100]))
                except OSError:
                    pass
                return
            if opcode == OP_PING:
                send_raw(make_frame(OP_PONG, payload))
                continue
            if opcode == OP_PONG:
                continue
            if opcode == OP_CLOSE:
                code = payload[:2] if len(payload) >= 2 else struct.pack(">H", 1000)
                try:
                    send_raw(make_frame(OP_CLOSE, code))
                except OSError:
                    pass
                return
            if opcode == OP_CONT:
                bad = ("continuation without a started message"
                       if frag_opcode is None else "")
                frag_buf += payload
                if not bad and len(frag_buf) > MAX_INBOUND:
                    bad = "fragmented message exceeds the inbound limit"
                if bad:
                    try:
                        send_raw(make_frame(OP_CLOSE,
                                            struct.pack(">H", 1002) + bad.encode()))
                    except OSError:
                        pass
                    return
                if not fin:
                    continue
                opcode, payload = frag_opcode, bytes(frag_buf)
                frag_opcode, frag_buf = None, bytearray()
            elif not fin:
                frag_opcode = opcode
                frag_buf = bytearray(payload)
                continue
            if opcode in (OP_TEXT, OP_BINARY):
                self._handle_control(game_id, payload, send)

    def _handle_control(self, game_id: str, data: bytes, send) -> None:
        try:
            msg = decode_payload(data)
        except DecodeError as exc:
            send(ErrorMessage(reason=str(exc), field_name=exc.field))
            return
        txn = getattr(msg, "txn", "")

        def answer(out) -> None:
            if txn and hasattr(out, "txn"):
                out = replace(out, txn=txn)
            send(out)

        if not isinstance(msg, GameControl):
            answer(ErrorMessage(
                reason=f"{type(msg).__name__} is not accepted over the bridge"))
            return
        if msg.game_id != game_id:
            answer(ErrorMessage(reason="control addresses a different game"))
            return
        try:
            if msg.op == "start":
                self.server.start_game(game_id)
            elif msg.op == "pause":
                self.server.pause_game(game_id)
            elif msg.op == "resume":
                self.server.resume_game(game_id)
            else:
                self.server.clock_press(game_id, msg.player)
        except (KeyError, ValueError) as exc:
            answer(ErrorMessage(reason=str(exc)))
            return
        answer(self.server.score_update(game_id))
