from .record import PairedRecord, DatasetHeader, Batch
from .bank import EmbeddingBank, RecallReport, SimilaritySummary, MODALITY_SEQUENCE, MODALITY_STRUCTURE
from .report import EpochLog, TrainReport, AblationRow

__all__ = [
    "PairedRecord",
    "DatasetHeader",
    "Batch",
    "EmbeddingBank",
    "RecallReport",
    "SimilaritySummary",
    "MODALITY_SEQUENCE",
    "MODALITY_STRUCTURE",
    "EpochLog",
    "TrainReport",
    "AblationRow",
]
