"""Append-only key-value file, one JSON object per line; last write wins."""
from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Any, Iterator

_DELETED = {"$deleted": True}


class KVStore:
    def __init__(self, path: str | os.PathLike, durable: bool = True):
        self.path = Path(path)
        self.durable = durable
        self._lock = threading.Lock()
        self._data: dict[str, Any] = {}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    # torn final line from an interrupted append
                    continue
                if entry.get("v") == _DELETED:
                    self._data.pop(entry["k"], None)
                else:
                    self._data[entry["k"]] = entry["v"]

    def _append(self, key: str, value: Any) -> None:
        line = json.dumps({"k": key, "v": value}, sort_keys=True, separators=(",", ":")) + "\n"
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            if self.durable:
                os.fsync(fh.fileno())

    def put(self, key: str, value: Any) -> None:
        with self._lock:
            self._append(key, value)
            self._data[key] = value

    def put_many(self, items: dict[str, Any]) -> None:
        with self._lock:
            for k, v in items.items():
                self._append(k, v)
            self._data.update(items)

    def delete(self, key: str) -> None:
        with self._lock:
            if key in self._data:
                self._append(key, _DELETED)
                del self._data[key]

    def get(self, key: str, default: Any = None) -> Any:
        with self._lock:
            return self._data.get(key, default)

    def __contains__(self, key: str) -> bool:
        with self._lock:
            return key in self._data

    def keys(self, prefix: str = "") -> Iterator[str]:
        with self._lock:
            ks = [k for k in self._data if k.startswith(prefix)]
        return iter(ks)

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)
