from __future__ import annotations

import argparse
import logging

from crossalign.commands import add_dataset_flags, add_split_flags, add_train_flags, command, load_records
from crossalign.config import RUN_CONFIG_NAME, RunConfig, write_run_config
from crossalign.services.dataset_service import split
from crossalign.services.retrieval_service import export_loss_curve
from crossalign.services.training_service import fit

logger = logging.getLogger(__name__)


def configure(parser: argparse.ArgumentParser) -> None:
    add_dataset_flags(parser)
    add_split_flags(parser)
    add_train_flags(parser)


@command("train", configure)
def cmd_train(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Train both projection heads and write the checkpoint and loss curve."""
    train_cfg = cfg.train_config()
    records = load_records(cfg)
    train_set, val_set, test_set = split(records, cfg.split_fractions(), cfg.seed)
    logger.info(f"Split {len(records)} records into {len(train_set)}/{len(val_set)}/{len(test_set)}")

    write_run_config(cfg, cfg.output_dir / RUN_CONFIG_NAME)
    _, report = fit(train_set, val_set, train_cfg, cfg.checkpoint_path())
    export_loss_curve(report.epochs, cfg.output_dir / "loss_curve.csv")

    if report.final_loss is not None:
        print(f"final loss: {report.final_loss:.6f} after {len(report.epochs)} epochs")
    else:
        print("no epochs run; wrote the initial checkpoint")
    if report.best_epoch is not None:
        print(f"best validation Recall@5: {100 * report.best_recall_at_5:.2f}% at epoch {report.best_epoch}")
    print(f"checkpoint: {report.checkpoint_path}")
