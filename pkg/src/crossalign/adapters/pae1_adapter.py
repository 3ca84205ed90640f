from __future__ import annotations

import logging
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from crossalign.adapters.codec import ByteReader, pack_str, pack_u32
from crossalign.exceptions import CorruptionError, FormatError, StorageError, ValidationError
from crossalign.models import DatasetHeader, PairedRecord

logger = logging.getLogger(__name__)

FLOAT_DTYPE = "<f4"


class PAE1DatasetAdapter:
    """
    Reader/writer for the PAE1 paired-embedding format.

    Layout (little-endian): "PAE1", u32 version=1, u32 d_p, u32 d_s, u32 count, then per record
    [u32 id_len][id utf-8][u32 t_P][t_P*d_p f32][u32 t_S][t_S*d_s f32].
    Floats are stored as 32-bit and widened to 64-bit on load.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)

    # ------------------------------------
    # Write
    # ------------------------------------
    def write(self, records: Sequence[PairedRecord], d_p: Optional[int] = None, d_s: Optional[int] = None) -> None:
        records = list(records)
        if records:
            d_p = records[0].d_p if d_p is None else d_p
            d_s = records[0].d_s if d_s is None else d_s
        d_p, d_s = d_p or 0, d_s or 0
        _check_records(records, d_p, d_s)

        parts = [DatasetHeader.MAGIC, pack_u32(DatasetHeader.VERSION), pack_u32(d_p), pack_u32(d_s),
                 pack_u32(len(records))]
        for r in records:
            parts.append(pack_str(r.id))
            for tokens in (r.seq_tokens, r.struct_tokens):
                stored = tokens.astype(FLOAT_DTYPE)
                if not np.all(np.isfinite(stored)):
                    raise ValidationError(f"{r.id}: token values overflow 32-bit floats")
                parts.append(pack_u32(tokens.shape[0]))
                parts.append(stored.tobytes(order="C"))

        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_bytes(b"".join(parts))
        except OSError as e:
            raise StorageError(f"could not write dataset {self.path}: {e}") from e
        logger.info(f"Wrote {len(records)} records (d_p={d_p}, d_s={d_s}) to {self.path}")

    # ------------------------------------
    # Read
    # ------------------------------------
    def _load_bytes(self) -> bytes:
        try:
            return self.path.read_bytes()
        except OSError as e:
            raise StorageError(f"could not read dataset {self.path}: {e}") from e

    def _parse_header(self, reader: ByteReader) -> DatasetHeader:
        magic = reader.take(4)
        if magic != DatasetHeader.MAGIC:
            raise FormatError(f"{self.path}: bad magic {magic!r}, expected {DatasetHeader.MAGIC!r}")
        version = reader.u32()
        if version != DatasetHeader.VERSION:
            raise FormatError(f"{self.path}: unsupported PAE1 version {version}")
        return DatasetHeader(d_p=reader.u32(), d_s=reader.u32(), count=reader.u32(), magic=magic, version=version)

    def read_header(self) -> DatasetHeader:
        return self._parse_header(ByteReader(self._load_bytes(), str(self.path)))

    def read(self) -> List[PairedRecord]:
        reader = ByteReader(self._load_bytes(), str(self.path))
        header = self._parse_header(reader)

        records: List[PairedRecord] = []
        for _ in range(header.count):
            record_id = reader.text()
            matrices = []
            for width in (header.d_p, header.d_s):
                t = reader.u32()
                if t < 1:
                    raise CorruptionError(f"{self.path}: record '{record_id}' has an empty token matrix")
                values = reader.array(FLOAT_DTYPE, t * width).astype(np.float64)
                matrices.append(values.reshape(t, width))
            records.append(PairedRecord(record_id, matrices[0], matrices[1]))

        if reader.remaining():
            raise CorruptionError(f"{self.path}: {reader.remaining()} trailing bytes after {header.count} records")
        _check_unique(records)
        logger.info(f"Read {len(records)} records (d_p={header.d_p}, d_s={header.d_s}) from {self.path}")
        return records


def _check_unique(records: Sequence[PairedRecord]) -> None:
    seen = set()
    for r in records:
        if r.id in seen:
            raise ValidationError(f"duplicate record id '{r.id}'")
        seen.add(r.id)


def _check_records(records: Sequence[PairedRecord], d_p: int, d_s: int) -> None:
    for r in records:
        if r.d_p != d_p or r.d_s != d_s:
            raise ValidationError(
                f"record '{r.id}' has widths ({r.d_p}, {r.d_s}), dataset expects ({d_p}, {d_s})"
            )
    _check_unique(records)


def write_dataset(path: str | Path, records: Sequence[PairedRecord]) -> None:
    PAE1DatasetAdapter(path).write(records)


def read_dataset(path: str | Path) -> List[PairedRecord]:
    return PAE1DatasetAdapter(path).read()
