"""Grayscale PNG encoding with zero dependencies.

Images live in [-1, 1]; quantization maps that range onto 0..255 with
round-half-up (so 0.0 lands exactly on 128).  The encoder emits 8-bit
grayscale PNGs with filter 0 on every row and a fixed zlib level, so the
same image always produces the same bytes.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
ZLIB_LEVEL = 9


def quantize_u8(img: np.ndarray) -> np.ndarray:
    """[-1, 1] -> uint8 0..255, round half up; values outside are clipped."""
    arr = np.asarray(img, dtype=np.float64)
    q = np.floor((arr + 1.0) * 127.5 + 0.5)
    return np.clip(q, 0, 255).astype(np.uint8)


def upscale_nearest(img: np.ndarray, factor: int) -> np.ndarray:
    if factor < 1:
        raise ValueError("factor must be >= 1")
    return np.repeat(np.repeat(img, factor, axis=0), factor, axis=1)


def _chunk(kind: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(kind + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + kind + payload + struct.pack(">I", crc)


def png_encode_gray(u8: np.ndarray) -> bytes:
    """8-bit grayscale PNG bytes for a (H, W) uint8 array."""
    arr = np.asarray(u8)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise ValueError(f"need a 2-d uint8 array, got {arr.dtype} {arr.shape}")
    h, w = arr.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    raw = b"".join(b"\x00" + arr[r].tobytes() for r in range(h))
    idat = zlib.compress(raw, ZLIB_LEVEL)
    return PNG_SIGNATURE + _chunk(b"IHDR", ihdr) + _chunk(b"IDAT", idat) + _chunk(b"IEND", b"")


def render_png(img: np.ndarray, scale: int = 8) -> bytes:
    """[-1, 1] image -> PNG bytes, nearest-neighbor upscaled for visibility."""
    return png_encode_gray(upscale_nearest(quantize_u8(img), scale))
