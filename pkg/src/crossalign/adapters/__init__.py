from .base import DatasetAdapter, CheckpointAdapter
from .pae1_adapter import PAE1DatasetAdapter, read_dataset, write_dataset
from .checkpoint_adapter import (
    BinaryCheckpointAdapter,
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "DatasetAdapter",
    "CheckpointAdapter",
    "PAE1DatasetAdapter",
    "read_dataset",
    "write_dataset",
    "BinaryCheckpointAdapter",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
]
