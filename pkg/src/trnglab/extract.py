"""COUNT[6:4] extraction, bit packing, and raster rendering.

The TRNG output is bits 6..4 of the 14-bit collapse count: the LSBs below
are dropped for flip-flop mismatch immunity, the bits above carry almost no
entropy once the count spread exceeds 128.  Symbols serialize MSB-first into
bitstreams; bitstreams pack MSB-first into bytes with zero padding and a
structured-text sidecar carrying length and origin.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_COUNT = (1 << 14) - 1


@dataclass(frozen=True, eq=False)
class Bitstream:
    bits: np.ndarray
    origin: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        object.__setattr__(self, "bits", arr)

    @property
    def length(self) -> int:
        return int(self.bits.size)


def count_to_symbol(count: int) -> int:
    """Bits 6..4 of a 14-bit collapse count, bit 6 most significant."""
    if not 0 <= count <= MAX_COUNT:
        raise ValueError("count out of 14-bit range")
    return (count >> 4) & 7


def symbols_to_bitstream(symbols, origin: dict | None = None) -> Bitstream:
    """Serialize 3-bit symbols MSB-first; length is 3 per symbol."""
    syms = np.asarray(list(symbols), dtype=np.int64)
    if syms.size and (syms.min() < 0 or syms.max() > 7):
        raise ValueError("symbols must be 3-bit values")
    bits = np.empty(3 * syms.size, dtype=np.uint8)
    bits[0::3] = (syms >> 2) & 1
    bits[1::3] = (syms >> 1) & 1
    bits[2::3] = syms & 1
    return Bitstream(bits=bits, origin=dict(origin or {}))


def _pack(bits: np.ndarray) -> bytes:
    return np.packbits(bits).tobytes()


def _unpack(payload: bytes, length: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8))[:length]


def write_bitstream(bs: Bitstream, path: str | Path) -> None:
    """Packed bytes at path, sidecar JSON at path + '.meta'."""
    path = Path(path)
    path.write_bytes(_pack(bs.bits))
    meta = {"length": bs.length, "origin": bs.origin}
    Path(str(path) + ".meta").write_text(json.dumps(meta, indent=2) + "\n")


def read_bitstream(path: str | Path) -> Bitstream:
    path = Path(path)
    meta_path = Path(str(path) + ".meta")
    if not meta_path.exists():
        raise ValueError(f"missing sidecar {meta_path}")
    meta = json.loads(meta_path.read_text())
    length = int(meta["length"])
    payload = path.read_bytes()
    if len(payload) != (length + 7) // 8:
        raise ValueError("payload size does not match sidecar length")
    return Bitstream(bits=_unpack(payload, length),
                     origin=dict(meta.get("origin", {})))


def render_raster(bs: Bitstream, width: int, scan_order: str = "row-major",
                  fmt: str = "P4") -> bytes:
    """Portable bitmap of the stream, 1 = black.

    row-major fills left-to-right then top-to-bottom; column-major fills
    top-to-bottom then left-to-right (the source material describes both).
    Trailing cells beyond the stream length render white.
    """
    if width < 1:
        raise ValueError("width must be positive")
    if scan_order not in ("row-major", "column-major"):
        raise ValueError("scan_order must be row-major or column-major")
    if fmt not in ("P1", "P4"):
        raise ValueError("fmt must be P1 or P4")
    n = bs.length
    height = math.ceil(n / width) if n else 1
    if scan_order == "row-major":
        flat = np.zeros(height * width, dtype=np.uint8)
        flat[:n] = bs.bits
        grid = flat.reshape(height, width)
    else:
        # consecutive bits run down a column, columns advance rightward
        flat = np.zeros(width * height, dtype=np.uint8)
        flat[:n] = bs.bits
        grid = flat.reshape(width, height).T
    header = f"{fmt}\n{width} {height}\n".encode("ascii")
    if fmt == "P1":
        body = "\n".join(" ".join(str(int(v)) for v in row)
                         for row in grid).encode("ascii") + b"\n"
        return header + body
    return header + np.packbits(grid, axis=1).tobytes()
