"""Self-describing parameter archives.

Layout: magic line, 8-byte little-endian header length, UTF-8 JSON header
(sorted keys), then every tensor as little-endian float64 in header
order. Nothing time-dependent is written, so identical stores produce
identical bytes.
"""
from __future__ import annotations

import json
import struct
from typing import Any

import numpy as np

from .params import ParameterStore

MAGIC = b"DCST-ARCHIVE\n"
SCHEMA_VERSION = 1


class ArchiveError(ValueError):
    pass


def dumps(store: ParameterStore, config: dict[str, Any] | None = None,
          vocabs: dict[str, Any] | None = None, meta: dict[str, Any] | None = None) -> bytes:
    tensors, chunks, offset = [], [], 0
    for name, t in store.items():
        arr = np.ascontiguousarray(t.data, dtype="<f8")
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset,
                        "frozen": name in store.frozen})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "schema_version": SCHEMA_VERSION,
        "config": config or {},
        "vocabs": vocabs or {},
        "meta": meta or {},
        "tensors": tensors,
    }
    hb = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(hb)) + hb + b"".join(chunks)


def loads(blob: bytes) -> tuple[ParameterStore, dict[str, Any]]:
    if not blob.startswith(MAGIC):
        raise ArchiveError("not a parameter archive")
    pos = len(MAGIC)
    if len(blob) < pos + 8:
        raise ArchiveError("archive truncated")
    (hlen,) = struct.unpack("<Q", blob[pos:pos + 8])
    pos += 8
    try:
        header = json.loads(blob[pos:pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError, struct.error):
        raise ArchiveError("corrupt archive header") from None
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ArchiveError(f"unsupported schema version {header.get('schema_version')}")
    data = blob[pos + hlen:]
    store = ParameterStore()
    for entry in header["tensors"]:
        n = int(np.prod(entry["shape"], dtype=np.int64))
        if entry["offset"] + 8 * n > len(data):
            raise ArchiveError(f"archive truncated inside tensor {entry['name']!r}")
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=entry["offset"]).reshape(entry["shape"])
        store.add(entry["name"], arr.astype(np.float64))
        if entry.get("frozen"):
            store.freeze([entry["name"]])
    return store, header


def save(path, store: ParameterStore, **kw) -> None:
    with open(path, "wb") as f:
        f.write(dumps(store, **kw))


def load(path) -> tuple[ParameterStore, dict[str, Any]]:
    with open(path, "rb") as f:
        return loads(f.read())
