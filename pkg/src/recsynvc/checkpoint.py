"""Binary checkpoint container.

Layout (little-endian throughout):

    magic   4 bytes  b"S3CK"
    version u32      currently 1
    meta    u32 byte length, then UTF-8 JSON (keys sorted)
    count   u32      number of tensors
    tensors repeated, sorted by name:
        name   u32 byte length, then UTF-8 name
        ndim   u32, then ndim u32 dims
        data   float64 row-major payload

JSON keys and tensor entries are sorted so that writing the same logical
checkpoint always produces the same bytes.  Writes go through a temp file
and an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagicError, TruncatedFileError, VersionMismatchError

MAGIC = b"S3CK"
VERSION = 1
CHECKPOINT_SUFFIX = ".s3ck"

_U32 = struct.Struct("<I")


@dataclass
class Checkpoint:
    """JSON-serializable metadata plus named float64 tensors."""

    meta: dict
    tensors: dict[str, np.ndarray] = field(default_factory=dict)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    path = Path(path)
    meta_blob = json.dumps(ckpt.meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, _U32.pack(VERSION), _U32.pack(len(meta_blob)), meta_blob,
             _U32.pack(len(ckpt.tensors))]
    for name in sorted(ckpt.tensors):
        tensor = np.ascontiguousarray(ckpt.tensors[name], dtype=np.float64)
        blob = name.encode("utf-8")
        parts.append(_U32.pack(len(blob)))
        parts.append(blob)
        parts.append(_U32.pack(tensor.ndim))
        for dim in tensor.shape:
            parts.append(_U32.pack(dim))
        parts.append(tensor.astype("<f8").tobytes())
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(b"".join(parts))
    os.replace(tmp, path)


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(f"{self.path}: truncated checkpoint")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob, path)
    magic = r.take(4)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    version = r.u32()
    if version != VERSION:
        raise VersionMismatchError(
            f"{path}: checkpoint version {version}, this reader supports {VERSION}"
        )
    meta = json.loads(r.take(r.u32()).decode("utf-8"))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        shape = tuple(r.u32() for _ in range(r.u32()))
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(r.take(count * 8), dtype="<f8").reshape(shape)
        tensors[name] = data.astype(np.float64)
    return Checkpoint(meta=meta, tensors=tensors)
