from __future__ import annotations

import argparse
import logging

from crossalign.commands import add_dataset_flags, add_synth_flags, command
from crossalign.config import RunConfig
from crossalign.services.dataset_service import generate_synthetic

logger = logging.getLogger(__name__)


def configure(parser: argparse.ArgumentParser) -> None:
    add_dataset_flags(parser)
    add_synth_flags(parser)


@command("gen", configure)
def cmd_gen(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Generate a synthetic paired dataset and write it as PAE1."""
    spec = cfg.synth_spec()
    records = generate_synthetic(spec)
    cfg.create_dataset_adapter().write(records, spec.d_p, spec.d_s)
    print(f"wrote {len(records)} records (d_p={spec.d_p}, d_s={spec.d_s}) to {cfg.dataset}")
