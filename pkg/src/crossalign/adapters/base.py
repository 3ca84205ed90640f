from __future__ import annotations

from typing import TYPE_CHECKING, List, Protocol, Sequence, runtime_checkable

if TYPE_CHECKING:
    from crossalign.adapters.checkpoint_adapter import Checkpoint
    from crossalign.models import DatasetHeader, PairedRecord


@runtime_checkable
class DatasetAdapter(Protocol):
    """
    Persistence contract for paired-embedding datasets.
    Readers must return records in file order and reject corrupt or foreign files.
    """

    def write(self, records: Sequence[PairedRecord]) -> None: ...
    def read(self) -> List[PairedRecord]: ...
    def read_header(self) -> DatasetHeader: ...


@runtime_checkable
class CheckpointAdapter(Protocol):
    """Persistence contract for trained heads, loss state and run configuration."""

    def save(self, checkpoint: Checkpoint) -> None: ...
    def load(self) -> Checkpoint: ...
