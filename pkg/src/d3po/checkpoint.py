"""Single-file tensor container.

Layout, all little-endian:

    8 bytes   magic "D3POCKPT"
    4 bytes   format version (uint32)
    8 bytes   header length in bytes (uint64)
    N bytes   canonical JSON header {"meta": ..., "tensors": [{"name","shape"},...]}
    payload   each tensor as raw float32, C order, in header order
    4 bytes   CRC-32 of everything above (uint32)

The header JSON is canonical (sorted keys, no whitespace), the payload is
float32, and tensor order is explicit — so load followed by save reproduces
the file byte for byte.  Used for model checkpoints and the trajectory spool.
"""

from __future__ import annotations

import io
import json
import struct
import zlib
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .nd import ParamSet, Tensor

MAGIC = b"D3POCKPT"
VERSION = 1


class CheckpointError(Exception):
    """Raised for malformed, truncated, or corrupt container files."""


def _canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def write_container(dest, meta: dict, tensors: list[tuple[str, np.ndarray]]) -> None:
    """Write named tensors (stored as float32) plus a JSON meta block."""
    names = [n for n, _ in tensors]
    if len(set(names)) != len(names):
        raise ValueError("duplicate tensor names")
    header = _canonical_json(
        {
            "meta": meta,
            "tensors": [{"name": n, "shape": list(a.shape)} for n, a in tensors],
        }
    )
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    buf.write(struct.pack("<Q", len(header)))
    buf.write(header)
    for _, arr in tensors:
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    body = buf.getvalue()
    crc = zlib.crc32(body) & 0xFFFFFFFF
    data = body + struct.pack("<I", crc)
    if isinstance(dest, (str, Path)):
        Path(dest).write_bytes(data)
    else:
        dest.write(data)


def read_container(src) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a container; returns (meta, ordered name->float64 array)."""
    if isinstance(src, (str, Path)):
        data = Path(src).read_bytes()
    else:
        data = src.read()
    if len(data) < len(MAGIC) + 4 + 8 + 4:
        raise CheckpointError("truncated container")
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("bad magic")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError("CRC mismatch: corrupt container")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", data, off)
    off += 4
    if version != VERSION:
        raise CheckpointError(f"unsupported container version {version}")
    (hlen,) = struct.unpack_from("<Q", data, off)
    off += 8
    try:
        header = json.loads(data[off : off + hlen])
    except ValueError as e:
        raise CheckpointError(f"bad header JSON: {e}") from None
    off += hlen
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if off + nbytes > len(data) - 4:
            raise CheckpointError("payload shorter than header promises")
        arr = np.frombuffer(data[off : off + nbytes], dtype="<f4").reshape(shape)
        tensors[entry["name"]] = arr.astype(np.float64)
        off += nbytes
    if off != len(data) - 4:
        raise CheckpointError("trailing bytes after payload")
    return header["meta"], tensors


def save_params(dest, params: ParamSet, meta: dict) -> None:
    write_container(dest, meta, [(n, t.data) for n, t in params.items()])


def load_params(src, role: str = "trainable") -> tuple[ParamSet, dict]:
    meta, tensors = read_container(src)
    params = ParamSet(role=role)
    for name, arr in tensors.items():
        params.add(name, Tensor(arr))
    return params, meta


def container_bytes(meta: dict, tensors: list[tuple[str, np.ndarray]]) -> bytes:
    buf = io.BytesIO()
    write_container(buf, meta, tensors)
    return buf.getvalue()
