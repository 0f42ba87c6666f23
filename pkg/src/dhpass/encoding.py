"""Canonical byte encodings used for everything that gets signed or hashed.

A signed tuple is the concatenation of ``len(field) as 4-byte big-endian ||
field`` in declared order. Timestamps are 8-byte big-endian seconds.
"""
from __future__ import annotations

import base64
import json
import struct
from typing import Any, Iterable


def encode_fields(fields: Iterable[bytes | str]) -> bytes:
    out = bytearray()
    for f in fields:
        if isinstance(f, str):
            f = f.encode("utf-8")
        out += struct.pack(">I", len(f))
        out += f
    return bytes(out)


def decode_fields(data: bytes) -> list[bytes]:
    fields = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ValueError("truncated length prefix")
        (n,) = struct.unpack_from(">I", data, pos)
        pos += 4
        if pos + n > len(data):
            raise ValueError("truncated field")
        fields.append(data[pos:pos + n])
        pos += n
    return fields


def u64(t: int) -> bytes:
    return struct.pack(">Q", t)


def read_u64(b: bytes) -> int:
    if len(b) != 8:
        raise ValueError("expected 8-byte integer")
    return struct.unpack(">Q", b)[0]


def u32(v: int) -> bytes:
    return struct.pack(">I", v)


def read_u32(b: bytes) -> int:
    if len(b) != 4:
        raise ValueError("expected 4-byte integer")
    return struct.unpack(">I", b)[0]


# JSON with byte strings tagged as {"$b64": ...}

def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, (bytes, bytearray)):
        return {"$b64": base64.b64encode(bytes(obj)).decode("ascii")}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def from_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        if set(obj) == {"$b64"}:
            return base64.b64decode(obj["$b64"], validate=True)
        return {k: from_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [from_jsonable(v) for v in obj]
    return obj


def canonical_json(obj: Any) -> bytes:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":")).encode("utf-8")
