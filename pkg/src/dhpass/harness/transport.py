"""Two interchangeable transports behind one ``call(msg_type, payload)`` contract.

Both run every message through the same envelope codec, a 4-byte big-endian
length followed by JSON ``{msg_type, session_id, payload}`` with byte fields
base64-tagged. The in-process transport hands the frame to the server
directly; the TCP one sends it over a socket.
"""
from __future__ import annotations

import itertools
import json
import logging
import socket
import socketserver
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Protocol, Sequence

from ..encoding import canonical_json, from_jsonable, to_jsonable
from ..errors import ERROR_TYPES, DHPError, ProtocolError, TransportError
from .transcript import Transcript

log = logging.getLogger(__name__)

MAX_FRAME = 16 * 1024 * 1024


class Handler(Protocol):
    def handle(self, msg_type: str, payload: dict) -> dict: ...


class Endpoint(Protocol):
    def call(self, msg_type: str, payload: dict, session_id: str = "") -> dict: ...


# -- codec ----------------------------------------------------------------------


def pack(msg_type: str, payload: dict, session_id: str = "") -> bytes:
    body = json.dumps({"msg_type": msg_type, "session_id": session_id, "payload": to_jsonable(payload)},
                      sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack(">I", len(body)) + body


def unpack(frame: bytes) -> tuple[str, str, dict]:
    if len(frame) < 4:
        raise ProtocolError("short frame")
    (n,) = struct.unpack(">I", frame[:4])
    if n != len(frame) - 4 or n > MAX_FRAME:
        raise ProtocolError("frame length mismatch")
    env = json.loads(frame[4:])
    return env["msg_type"], env.get("session_id", ""), from_jsonable(env["payload"])


def serve_frame(handler: Handler, frame: bytes) -> bytes:
    """Decode a request frame, dispatch it and encode the reply or error."""
    session_id = ""
    try:
        msg_type, session_id, payload = unpack(frame)
        reply = handler.handle(msg_type, payload)
        return pack(f"{msg_type}_reply", reply, session_id)
    except DHPError as exc:
        return pack("error", {"kind": exc.kind, "detail": str(exc)}, session_id)
    except Exception as exc:  # never let a bad request kill the server loop
        log.exception("unhandled error while serving a frame")
        return pack("error", {"kind": "ProtocolError", "detail": f"{type(exc).__name__}: {exc}"}, session_id)


def open_reply(frame: bytes) -> dict:
    msg_type, _, payload = unpack(frame)
    if msg_type == "error":
        cls = ERROR_TYPES.get(payload.get("kind"), DHPError)
        raise cls(payload.get("detail", ""))
    return payload


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        buf += chunk
    return bytes(buf)


def read_frame(sock: socket.socket) -> bytes:
    head = _recv_exact(sock, 4)
    (n,) = struct.unpack(">I", head)
    if n > MAX_FRAME:
        raise ProtocolError("frame too large")
    return head + _recv_exact(sock, n)


# -- endpoints ------------------------------------------------------------------


class LocalEndpoint:
    def __init__(self, handler: Handler):
        self.handler = handler
        self.online = True

    def call(self, msg_type: str, payload: dict, session_id: str = "") -> dict:
        if not self.online:
            raise TransportError("endpoint offline")
        return open_reply(serve_frame(self.handler, pack(msg_type, payload, session_id)))


class TcpEndpoint:
    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.host, self.port, self.timeout = host, port, timeout
        self.online = True

    def call(self, msg_type: str, payload: dict, session_id: str = "") -> dict:
        if not self.online:
            raise TransportError("endpoint offline")
        try:
            with socket.create_connection((self.host, self.port), timeout=self.timeout) as s:
                s.sendall(pack(msg_type, payload, session_id))
                frame = read_frame(s)
        except OSError as exc:
            raise TransportError(f"{self.host}:{self.port} unreachable: {exc}") from exc
        return open_reply(frame)


class _FrameHandler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        try:
            frame = read_frame(self.request)
        except (OSError, ProtocolError):
            return
        self.request.sendall(serve_frame(self.server.target, frame))  # type: ignore[attr-defined]


class _ThreadingServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class TcpHost:
    """Serves one handler on a TCP port from a background thread."""

    def __init__(self, handler: Handler, host: str = "127.0.0.1", port: int = 0):
        self.server = _ThreadingServer((host, port), _FrameHandler)
        self.server.target = handler  # type: ignore[attr-defined]
        self.address = self.server.server_address
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()

    def close(self) -> None:
        self.server.shutdown()
        self.server.server_close()


# -- recording ------------------------------------------------------------------


class RecordingEndpoint:
    """Wraps an endpoint and logs every request/reply pair to a transcript."""

    def __init__(self, inner: Endpoint, sender: str, receiver: str, transcript: Transcript):
        self.inner, self.sender, self.receiver, self.transcript = inner, sender, receiver, transcript

    @property
    def online(self) -> bool:
        return getattr(self.inner, "online", True)

    @online.setter
    def online(self, value: bool) -> None:
        self.inner.online = value  # type: ignore[attr-defined]

    def call(self, msg_type: str, payload: dict, session_id: str = "") -> dict:
        self.transcript.record(self.sender, self.receiver, msg_type, payload)
        try:
            reply = self.inner.call(msg_type, payload, session_id)
        except DHPError as exc:
            self.transcript.record(self.receiver, self.sender, "error", {"kind": exc.kind})
            raise
        self.transcript.record(self.receiver, self.sender, f"{msg_type}_reply", reply)
        return reply


class ServerGroup:
    """Client-side view of the n servers; one call to :meth:`round` is one
    protocol round (all requests out, then all replies back)."""

    def __init__(self, endpoints: Sequence[Endpoint], sender: str, transcript: Transcript,
                 parallel: bool = False):
        self.endpoints = list(endpoints)
        self.n = len(self.endpoints)
        self.sender = sender
        self.transcript = transcript
        self.parallel = parallel
        self._seq = itertools.count(1)

    def round(self, msg_type: str, payloads: list[dict]) -> list[dict | DHPError]:
        if len(payloads) != self.n:
            raise ValueError("one payload per server")
        session_id = f"{self.sender}-{next(self._seq)}"
        for i, p in enumerate(payloads, start=1):
            self.transcript.record(self.sender, f"server{i}", msg_type, p)

        def one(i: int) -> dict | DHPError:
            try:
                return self.endpoints[i].call(msg_type, payloads[i], session_id)
            except DHPError as exc:
                return exc
            except Exception as exc:
                return TransportError(str(exc))

        if self.parallel and self.n > 1:
            with ThreadPoolExecutor(max_workers=self.n) as pool:
                results = list(pool.map(one, range(self.n)))
        else:
            results = [one(i) for i in range(self.n)]
        for i, r in enumerate(results, start=1):
            if isinstance(r, Exception):
                self.transcript.record(f"server{i}", self.sender, "error", {"kind": r.kind})
            else:
                self.transcript.record(f"server{i}", self.sender, f"{msg_type}_reply", r)
        return results

    def sequential(self, msg_type: str, payloads: list[dict]) -> list[dict]:
        """Deliver in index order, stopping at the first error (used by the
        health-authority push, where the last server must go last)."""
        out = []
        for i, p in enumerate(payloads, start=1):
            self.transcript.record(self.sender, f"server{i}", msg_type, p)
            try:
                r = self.endpoints[i - 1].call(msg_type, p)
            except DHPError as exc:
                self.transcript.record(f"server{i}", self.sender, "error", {"kind": exc.kind})
                raise
            self.transcript.record(f"server{i}", self.sender, f"{msg_type}_reply", r)
            out.append(r)
        return out
