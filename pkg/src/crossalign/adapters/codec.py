"""Little-endian primitives shared by the PAE1 dataset and checkpoint containers."""
from __future__ import annotations

import struct

import numpy as np

from crossalign.exceptions import CorruptionError

U32 = struct.Struct("<I")


def pack_u32(value: int) -> bytes:
    return U32.pack(value)


def pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    return U32.pack(len(raw)) + raw


class ByteReader:
    """Cursor over a byte buffer; running past the end is a corruption error."""

    def __init__(self, data: bytes, source: str = "file"):
        self.data = data
        self.pos = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptionError(f"{self.source} is truncated at byte {self.pos} (needed {n} more)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return U32.unpack(self.take(4))[0]

    def text(self) -> str:
        raw = self.take(self.u32())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptionError(f"{self.source} holds an undecodable string at byte {self.pos}") from exc

    def array(self, dtype: str, count: int) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * itemsize), dtype=dtype, count=count)

    def remaining(self) -> int:
        return len(self.data) - self.pos
