"""Canonical JSON encoding and content hashing for reproducible artifacts."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def canonical_json_bytes(obj) -> bytes:
    """Byte-stable encoding: sorted keys, no whitespace, no NaN/Inf."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_json(path, obj) -> None:
    data = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(data + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
