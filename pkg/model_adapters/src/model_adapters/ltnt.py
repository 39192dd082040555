"""Writer/reader for the LTNT per-layer latent file format.

Binary, little-endian: magic "LTNT", version u32=1, record count u32,
L u32, h u32, then per record an id-length u32, the UTF-8 id, and
L*h float32 values in layer-major order. This is the file contract the
downstream complexity classifier consumes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"LTNT"
VERSION = 1


def write_latents(path: str | Path, records: list[tuple[str, np.ndarray]]) -> None:
    """Write (claim_id, L x h float array) records."""
    if not records:
        raise ValueError("no records to write")
    layers, hidden = records[0][1].shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIII", VERSION, len(records), layers, hidden))
        for claim_id, data in records:
            if data.shape != (layers, hidden):
                raise ValueError(f"record {claim_id!r} shape {data.shape} differs")
            raw = claim_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_latents(path: str | Path) -> list[tuple[str, np.ndarray]]:
    def take(fh, n: int) -> bytes:
        raw = fh.read(n)
        if len(raw) != n:
            raise ValueError("latent file truncated")
        return raw

    with open(path, "rb") as fh:
        if take(fh, 4) != MAGIC:
            raise ValueError(f"{path}: not an LTNT file")
        version, count, layers, hidden = struct.unpack("<IIII", take(fh, 16))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        records = []
        for _ in range(count):
            (id_len,) = struct.unpack("<I", take(fh, 4))
            claim_id = take(fh, id_len).decode("utf-8")
            data = np.frombuffer(take(fh, layers * hidden * 4), dtype="<f4")
            records.append((claim_id, data.reshape(layers, hidden).copy()))
    return records
