"""Atomic file writing and framed binary container helpers.

All outputs go through :func:`atomic_write_bytes` / :func:`atomic_write_text`
(temp file in the target directory, then ``os.replace``), so an interrupted
run never leaves a truncated file behind.

Binary checkpoint formats share one frame: a 4-byte magic, a version byte, a
little-endian uint32 payload length, the payload, and a trailing CRC32 of the
payload.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from pathlib import Path

from .errors import DataError


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def frame(magic: bytes, version: int, payload: bytes) -> bytes:
    """Wrap a payload as magic | version | u32 length | payload | crc32."""
    if len(magic) != 4:
        raise ValueError("magic must be 4 bytes")
    head = magic + struct.pack("<BI", version, len(payload))
    return head + payload + struct.pack("<I", zlib.crc32(payload))


def unframe(data: bytes, magic: bytes) -> tuple[int, bytes]:
    """Validate a framed container and return (version, payload)."""
    if len(data) < 13 or data[:4] != magic:
        raise DataError(f"not a {magic.decode('ascii', 'replace')} container")
    version, length = struct.unpack_from("<BI", data, 4)
    end = 9 + length
    if len(data) != end + 4:
        raise DataError("container is truncated or has trailing bytes")
    payload = data[9:end]
    (crc,) = struct.unpack_from("<I", data, end)
    if crc != zlib.crc32(payload):
        raise DataError("container CRC mismatch")
    return version, payload
