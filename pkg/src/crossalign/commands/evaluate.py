from __future__ import annotations

import argparse
import logging

from crossalign.commands import (
    add_dataset_flags,
    add_eval_flags,
    add_split_flags,
    add_subset_flag,
    command,
    load_subset,
)
from crossalign.config import RunConfig
from crossalign.services.retrieval_service import (
    DIRECTION_STRUCT2SEQ,
    embed_pair_banks,
    export_embeddings,
    export_recall,
    export_similarity,
    export_similarity_summary,
    recall_at_k,
)
from crossalign.services.training_service import load_model

logger = logging.getLogger(__name__)


def configure(parser: argparse.ArgumentParser) -> None:
    add_dataset_flags(parser)
    add_split_flags(parser)
    add_eval_flags(parser)
    add_subset_flag(parser, "test")
    parser.add_argument("--k", default=argparse.SUPPRESS, help="comma-separated K values (K)")


@command("eval", configure)
def cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Report Recall@K on a split and export similarity and embedding CSVs."""
    cfg.require_files(cfg.checkpoint_path())
    model, _ = load_model(cfg.checkpoint_path())
    records = load_subset(cfg, args.subset)

    seq_bank, struct_bank = embed_pair_banks(model.seq_head, model.struct_head, records)
    queries, corpus = seq_bank, struct_bank
    if args.direction == DIRECTION_STRUCT2SEQ:
        queries, corpus = struct_bank, seq_bank

    report = recall_at_k(queries, corpus, cfg.k, direction=args.direction)
    summary = export_similarity(queries, corpus, cfg.output_dir / "similarity.csv")
    export_recall(report, cfg.output_dir / "recall.csv")
    export_similarity_summary(summary, cfg.output_dir / "similarity_summary.csv")
    export_embeddings([seq_bank, struct_bank], cfg.output_dir / "embeddings.csv")

    for k, recall in zip(report.k_values, report.recall_at_k):
        print(f"Recall@{k}: {100 * recall:.2f}%")
    print(
        f"similarity: mean diagonal {summary.mean_diagonal:.6f}, "
        f"mean off-diagonal {summary.mean_off_diagonal:.6f}, margin {summary.margin:.6f}"
    )
