"""
Tests for the checkpoint container.
"""
import os
import tempfile

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from crossalign.adapters import BinaryCheckpointAdapter, Checkpoint, CheckpointAdapter, load_checkpoint, save_checkpoint
from crossalign.exceptions import CorruptionError, FormatError, StorageError
from crossalign.losses import ClipConfig, SiglipConfig
from crossalign.numkit import Rng
from crossalign.projector import PARAMETER_NAMES, init


def make_checkpoint(loss=None):
    rng = Rng(31)
    return Checkpoint(
        seq_head=init(rng, 5, 8, 2),
        struct_head=init(rng, 3, 8, 2, "identity"),
        loss=loss or SiglipConfig(tau=0.05, bias=-7.25, bias_learnable=True),
        config={"epochs": 3, "seed": 31},
    )


class TestCheckpointAdapter:
    """Round-trips and corruption handling."""

    def test_implements_protocol(self):
        assert isinstance(BinaryCheckpointAdapter("c.bin"), CheckpointAdapter)

    def test_round_trip_is_bitwise(self):
        original = make_checkpoint()
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "run", "checkpoint.bin")
            save_checkpoint(path, original)
            loaded = load_checkpoint(path)
        for prefix, head in original.heads().items():
            other = loaded.heads()[prefix]
            assert (other.heads, other.projection) == (head.heads, head.projection)
            for name in PARAMETER_NAMES:
                assert_array_equal(getattr(other, name), getattr(head, name))
        assert loaded.loss == original.loss
        assert loaded.config == original.config

    def test_save_load_save_identical_bytes(self):
        with tempfile.TemporaryDirectory() as td:
            first, second = os.path.join(td, "a.bin"), os.path.join(td, "b.bin")
            save_checkpoint(first, make_checkpoint(ClipConfig(0.07)))
            save_checkpoint(second, load_checkpoint(first))
            with open(first, "rb") as a, open(second, "rb") as b:
                assert a.read() == b.read()

    def test_flipped_byte_fails_checksum(self):
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "c.bin")
            save_checkpoint(path, make_checkpoint())
            with open(path, "rb") as f:
                data = bytearray(f.read())
            data[len(data) // 2] ^= 0xFF
            with open(path, "wb") as f:
                f.write(bytes(data))
            with pytest.raises(CorruptionError):
                load_checkpoint(path)

    def test_truncated(self):
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "c.bin")
            save_checkpoint(path, make_checkpoint())
            with open(path, "rb") as f:
                data = f.read()
            with open(path, "wb") as f:
                f.write(data[: len(data) // 3])
            with pytest.raises(CorruptionError):
                load_checkpoint(path)

    def test_wrong_magic(self):
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "c.bin")
            with open(path, "wb") as f:
                f.write(b"PAE1" + bytes(32))
            with pytest.raises(FormatError):
                load_checkpoint(path)

    def test_missing_file(self):
        with tempfile.TemporaryDirectory() as td:
            with pytest.raises(StorageError):
                load_checkpoint(os.path.join(td, "none.bin"))

    def test_parameters_stored_as_float64(self):
        ckpt = make_checkpoint()
        ckpt.seq_head.query_token[0] = np.nextafter(1.0, 2.0)
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "c.bin")
            save_checkpoint(path, ckpt)
            assert load_checkpoint(path).seq_head.query_token[0] == np.nextafter(1.0, 2.0)
