from __future__ import annotations

import argparse

from crossalign.commands import (
    add_dataset_flags,
    add_eval_flags,
    add_split_flags,
    add_subset_flag,
    command,
    load_subset,
)
from crossalign.config import RunConfig
from crossalign.exceptions import ValidationError
from crossalign.models import MODALITY_SEQUENCE, MODALITY_STRUCTURE
from crossalign.services.retrieval_service import DIRECTION_STRUCT2SEQ, embed_bank, top_k
from crossalign.services.training_service import load_model


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--id", required=True, dest="query_id", help="record id to query with")
    parser.add_argument("--top", type=int, default=5, help="number of neighbours to list")
    add_dataset_flags(parser)
    add_split_flags(parser)
    add_eval_flags(parser)
    add_subset_flag(parser, "all")


@command("retrieve", configure)
def cmd_retrieve(args: argparse.Namespace, cfg: RunConfig) -> None:
    """List the nearest cross-modal neighbours of one record."""
    cfg.require_files(cfg.checkpoint_path())
    model, _ = load_model(cfg.checkpoint_path())
    records = load_subset(cfg, args.subset)
    query = next((r for r in records if r.id == args.query_id), None)
    if query is None:
        raise ValidationError(f"id '{args.query_id}' is not in the {args.subset} records of {cfg.dataset}")

    if args.direction == DIRECTION_STRUCT2SEQ:
        corpus = embed_bank(model.seq_head, [r.sequence() for r in records], MODALITY_SEQUENCE)
        vector = embed_bank(model.struct_head, [query.structure()], MODALITY_STRUCTURE).vectors[0]
    else:
        corpus = embed_bank(model.struct_head, [r.structure() for r in records], MODALITY_STRUCTURE)
        vector = embed_bank(model.seq_head, [query.sequence()], MODALITY_SEQUENCE).vectors[0]

    for rank, (item, score) in enumerate(top_k(vector, corpus, args.top), start=1):
        print(f"{rank}\t{item}\t{score:.6f}")
