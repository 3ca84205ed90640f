from __future__ import annotations

import json
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict

import numpy as np

from crossalign.adapters.codec import ByteReader, pack_str, pack_u32, U32
from crossalign.exceptions import CorruptionError, FormatError, StorageError
from crossalign.losses import LossConfig, SiglipConfig, make_loss_config
from crossalign.projector import PARAMETER_NAMES, ProjectionHead

logger = logging.getLogger(__name__)

MAGIC = b"PAEC"
VERSION = 1
TENSOR_DTYPE = "<f8"
HEAD_PREFIXES = ("seq", "struct")


@dataclass(eq=False)
class Checkpoint:
    """Both pooling heads, the loss state (including SigLIP's b) and the run configuration."""

    seq_head: ProjectionHead
    struct_head: ProjectionHead
    loss: LossConfig
    config: Dict[str, Any] = field(default_factory=dict)

    def heads(self) -> Dict[str, ProjectionHead]:
        return {"seq": self.seq_head, "struct": self.struct_head}


def _loss_to_dict(loss: LossConfig) -> Dict[str, Any]:
    data: Dict[str, Any] = {"name": loss.name, "tau": loss.tau}
    if isinstance(loss, SiglipConfig):
        data.update(bias=loss.bias, bias_learnable=loss.bias_learnable)
    return data


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """
    Container "PAEC" v1, little-endian:
    magic, u32 version, u32 json_len, json (sorted keys), u32 tensor_count,
    per tensor [u32 name_len][name][u32 ndim][u32 dims...][f64 data], then u32 CRC32 of all prior bytes.
    """
    meta = {
        "config": checkpoint.config,
        "loss": _loss_to_dict(checkpoint.loss),
        "heads": {
            prefix: {"heads": head.heads, "projection": head.projection}
            for prefix, head in checkpoint.heads().items()
        },
    }
    parts = [MAGIC, pack_u32(VERSION), pack_str(json.dumps(meta, sort_keys=True))]

    tensors = [(f"{prefix}.{name}", getattr(head, name))
               for prefix, head in checkpoint.heads().items() for name in PARAMETER_NAMES]
    parts.append(pack_u32(len(tensors)))
    for name, array in tensors:
        parts.append(pack_str(name))
        parts.append(pack_u32(array.ndim))
        parts.extend(pack_u32(dim) for dim in array.shape)
        parts.append(np.ascontiguousarray(array, dtype=TENSOR_DTYPE).tobytes())

    body = b"".join(parts)
    return body + pack_u32(zlib.crc32(body))


def decode_checkpoint(data: bytes, source: str = "checkpoint") -> Checkpoint:
    if len(data) < 12:
        raise CorruptionError(f"{source} is truncated ({len(data)} bytes)")
    if data[:4] != MAGIC:
        raise FormatError(f"{source}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    version = U32.unpack(data[4:8])[0]
    if version != VERSION:
        raise FormatError(f"{source}: unsupported checkpoint version {version}")
    body, (crc,) = data[:-4], U32.unpack(data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptionError(f"{source}: checksum mismatch (truncated or modified)")

    reader = ByteReader(body, source)
    reader.take(8)
    try:
        meta = json.loads(reader.text())
    except json.JSONDecodeError as exc:
        raise CorruptionError(f"{source}: unreadable metadata") from exc

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        name = reader.text()
        shape = tuple(reader.u32() for _ in range(reader.u32()))
        count = int(np.prod(shape)) if shape else 1
        tensors[name] = reader.array(TENSOR_DTYPE, count).astype(np.float64).reshape(shape)
    if reader.remaining():
        raise CorruptionError(f"{source}: trailing bytes after tensors")

    try:
        heads = {
            prefix: ProjectionHead(
                **{name: tensors[f"{prefix}.{name}"] for name in PARAMETER_NAMES},
                heads=int(meta["heads"][prefix]["heads"]),
                projection=meta["heads"][prefix]["projection"],
            )
            for prefix in HEAD_PREFIXES
        }
        loss_meta = meta["loss"]
        loss = make_loss_config(
            loss_meta["name"],
            tau=loss_meta["tau"],
            bias=loss_meta.get("bias", 0.0),
            bias_learnable=loss_meta.get("bias_learnable", False),
        )
    except KeyError as exc:
        raise CorruptionError(f"{source}: missing entry {exc}") from exc

    return Checkpoint(heads["seq"], heads["struct"], loss, meta.get("config", {}))


class BinaryCheckpointAdapter:
    """Stores a `Checkpoint` in the PAEC container at `path`."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def save(self, checkpoint: Checkpoint) -> None:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_bytes(encode_checkpoint(checkpoint))
        except OSError as e:
            raise StorageError(f"could not write checkpoint {self.path}: {e}") from e
        logger.info(f"Checkpoint saved to {self.path}")

    def load(self) -> Checkpoint:
        try:
            data = self.path.read_bytes()
        except OSError as e:
            raise StorageError(f"could not read checkpoint {self.path}: {e}") from e
        return decode_checkpoint(data, str(self.path))


def save_checkpoint(path: str | Path, checkpoint: Checkpoint) -> None:
    BinaryCheckpointAdapter(path).save(checkpoint)


def load_checkpoint(path: str | Path) -> Checkpoint:
    return BinaryCheckpointAdapter(path).load()
