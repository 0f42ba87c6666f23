"""Append-only message log and round counting."""
from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from typing import Iterable

from ..encoding import canonical_json


@dataclass(frozen=True)
class Entry:
    sender: str
    receiver: str
    msg_type: str
    digest: str
    wall_time: float

    def protocol_view(self) -> tuple[str, str, str, str]:
        """Everything except the wall clock."""
        return (self.sender, self.receiver, self.msg_type, self.digest)


def role_class(role: str) -> str:
    """server3 -> server, reader:gate-1 -> reader; other roles unchanged."""
    if role.startswith("server"):
        return "server"
    return role.split(":", 1)[0]


class Transcript:
    def __init__(self) -> None:
        self._entries: list[Entry] = []
        self._lock = threading.Lock()
        # raw payloads are kept only for inspection in tests, never exported
        self._payloads: list[dict] = []

    def record(self, sender: str, receiver: str, msg_type: str, payload: dict) -> None:
        digest = hashlib.sha256(canonical_json(payload)).hexdigest()
        with self._lock:
            self._entries.append(Entry(sender, receiver, msg_type, digest, time.time()))
            self._payloads.append(payload)

    def entries(self, start: int = 0) -> list[Entry]:
        with self._lock:
            return list(self._entries[start:])

    def payloads(self, start: int = 0) -> list[tuple[Entry, dict]]:
        with self._lock:
            return list(zip(self._entries[start:], self._payloads[start:]))

    def mark(self) -> int:
        with self._lock:
            return len(self._entries)

    def __len__(self) -> int:
        return self.mark()

    def export(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for e in self.entries():
                fh.write(json.dumps(e.__dict__, sort_keys=True) + "\n")


def count_rounds(entries: Iterable[Entry], a: str, b: str) -> int:
    """Round trips on the channel between role classes ``a`` and ``b``.

    A flight is a maximal run of consecutive messages on the channel going in
    one direction; a round trip is a flight answered by a flight back, so the
    count is ceil(flights / 2).
    """
    flights = 0
    last_dir = None
    for e in entries:
        s, r = role_class(e.sender), role_class(e.receiver)
        if {s, r} != {a, b} or s == r:
            continue
        if s != last_dir:
            flights += 1
            last_dir = s
    return (flights + 1) // 2


def record_rounds(entries: Iterable[Entry]) -> dict[str, int]:
    entries = list(entries)
    return {
        "client-reader": count_rounds(entries, "client", "reader"),
        "client-server": count_rounds(entries, "client", "server"),
    }
