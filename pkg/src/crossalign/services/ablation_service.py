"""
Sweeps one run-config axis, training one model per value on the same split, and
tabulates final loss, test recall and epochs-to-best per value.
"""
from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Sequence, Union

import pandas as pd

from crossalign.exceptions import ConfigurationError, CrossAlignError
from crossalign.models import AblationRow, PairedRecord
from crossalign.services.dataset_service import split
from crossalign.services.retrieval_service import _write_csv, export_loss_curve
from crossalign.services.training_service import evaluate, fit

if TYPE_CHECKING:
    from crossalign.config import RunConfig

logger = logging.getLogger(__name__)

AXES = ("tau", "loss", "bias", "projection")
ABLATION_COLUMNS = [
    "axis", "value", "status", "final_loss", "recall_at_1", "recall_at_5", "epochs_to_best", "error",
]


@dataclass
class AblationSpec:
    axis: str
    values: List[str]
    base: "RunConfig"
    overrides: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ConfigurationError(f"unknown ablation axis '{self.axis}', expected one of {', '.join(AXES)}")
        self.values = [str(v).strip() for v in self.values if str(v).strip()]
        if len(self.values) < 2:
            raise ConfigurationError(f"an ablation needs at least two values, got {self.values}")
        repeated = sorted(v for v, n in Counter(v.lower() for v in self.values).items() if n > 1)
        if repeated:
            raise ConfigurationError(f"ablation values must be distinct, repeated: {', '.join(repeated)}")

    def config_for(self, value: str) -> "RunConfig":
        changes: Dict[str, Any] = {self.axis: value}
        if self.axis == "bias":
            changes["loss"] = "siglip"
        return self.base.updated(**changes)


def _run_point(spec: AblationSpec, value: str, train_set: Sequence[PairedRecord],
               val_set: Sequence[PairedRecord], test_set: Sequence[PairedRecord],
               output_dir: Path) -> AblationRow:
    row = AblationRow(axis=spec.axis, value=value)
    point_dir = output_dir / f"{spec.axis}-{value}"
    try:
        cfg = spec.config_for(value)
        model, report = fit(train_set, val_set, cfg.train_config(), point_dir / "checkpoint.bin")
        export_loss_curve(report.epochs, point_dir / "loss_curve.csv")
        recall = evaluate(model, test_set, (1, 5))
        row.final_loss = report.final_loss
        row.recall_at_1, row.recall_at_5 = recall.recall(1), recall.recall(5)
        row.epochs_to_best = report.epochs_to_best()
    except CrossAlignError as e:
        logger.warning(f"Ablation point {spec.axis}={value} failed: {e}")
        row.status, row.error = AblationRow.STATUS_FAILED, str(e)
    return row


def run_ablation(spec: AblationSpec, records: Sequence[PairedRecord],
                 output_dir: Union[str, Path], workers: int = 1) -> List[AblationRow]:
    """
    Trains every sweep point on one shared split and writes `ablation.csv`.

    Failed points are recorded as rows with status "failed"; the sweep continues.
    """
    output_dir = Path(output_dir)
    train_set, val_set, test_set = split(records, spec.base.split_fractions(), spec.base.seed)
    if not test_set:
        raise ConfigurationError("ablation needs a non-empty test split")
    logger.info(f"Ablating {spec.axis} over {spec.values} with {workers} worker(s)")

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(
            lambda value: _run_point(spec, value, train_set, val_set, test_set, output_dir),
            spec.values,
        ))

    write_ablation_table(rows, output_dir / "ablation.csv")
    return rows


def write_ablation_table(rows: Sequence[AblationRow], path: Union[str, Path]) -> None:
    frame = pd.DataFrame([r.to_dict() for r in rows], columns=ABLATION_COLUMNS)
    _write_csv(frame, path, index=False, float_format="%.17g")
