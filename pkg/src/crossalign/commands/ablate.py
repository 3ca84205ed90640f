from __future__ import annotations

import argparse

from crossalign.commands import add_dataset_flags, add_split_flags, add_train_flags, command, load_records
from crossalign.config import RUN_CONFIG_NAME, RunConfig, write_run_config
from crossalign.services.ablation_service import AXES, AblationSpec, run_ablation


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--axis", required=True, choices=list(AXES), help="config key to sweep")
    parser.add_argument("--values", required=True, help="comma-separated values, at least two")
    parser.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="parallel sweep points (WORKERS)")
    add_dataset_flags(parser)
    add_split_flags(parser)
    add_train_flags(parser)


def _cell(value) -> str:
    if value is None:
        return "-"
    return f"{value:.4f}" if isinstance(value, float) else str(value)


@command("ablate", configure)
def cmd_ablate(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Train one model per value of an axis and tabulate the results."""
    spec = AblationSpec(args.axis, args.values.split(","), cfg)
    records = load_records(cfg)
    write_run_config(cfg, cfg.output_dir / RUN_CONFIG_NAME)
    rows = run_ablation(spec, records, cfg.output_dir, workers=cfg.workers)

    print("value\tstatus\tfinal_loss\tR@1\tR@5\tepochs_to_best")
    for row in rows:
        print("\t".join(_cell(v) for v in (
            row.value, row.status, row.final_loss, row.recall_at_1, row.recall_at_5, row.epochs_to_best,
        )))
    print(f"table: {cfg.output_dir / 'ablation.csv'}")
