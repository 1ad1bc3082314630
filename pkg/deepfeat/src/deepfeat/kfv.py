"""KFV1 feature-container writer/reader (the wire format of the
verification core's dataset module).

Layout, all integers little-endian: magic "KFV1", u32 version=1, u32
n_samples, u32 mode1, u32 mode2, u8 dtype (0 = IEEE-754 f32), 3 zero pad
bytes; then per sample u16 id length, UTF-8 id, and mode2 column slices of
mode1 floats.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"KFV1"
_HEADER = struct.Struct("<4sIIIIB3x")


def write_blocks(blocks: list[tuple[str, np.ndarray]], path) -> None:
    """Write (sample_id, mode1 x mode2 float32 matrix) pairs."""
    if not blocks:
        raise ValueError("no blocks to write")
    m1, m2 = blocks[0][1].shape
    chunks = [_HEADER.pack(MAGIC, 1, len(blocks), m1, m2, 0)]
    for sample_id, data in blocks:
        if data.shape != (m1, m2):
            raise ValueError(f"{sample_id}: shape {data.shape} != {(m1, m2)}")
        ident = sample_id.encode("utf-8")
        chunks.append(struct.pack("<H", len(ident)))
        chunks.append(ident)
        chunks.append(np.ascontiguousarray(data.T, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_blocks(path) -> list[tuple[str, np.ndarray]]:
    buf = Path(path).read_bytes()
    magic, version, n_samples, m1, m2, dtype = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC or version != 1 or dtype != 0:
        raise ValueError(f"{path}: not a KFV1 v1 float32 container")
    offset = _HEADER.size
    out = []
    for _ in range(n_samples):
        (id_len,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        ident = buf[offset : offset + id_len].decode("utf-8")
        offset += id_len
        values = np.frombuffer(buf, dtype="<f4", count=m1 * m2, offset=offset)
        offset += m1 * m2 * 4
        out.append((ident, values.reshape(m2, m1).T.copy()))
    return out
