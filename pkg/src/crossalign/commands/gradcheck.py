from __future__ import annotations

import argparse

from crossalign.commands import command
from crossalign.config import RunConfig
from crossalign.exceptions import CrossAlignError
from crossalign.losses import ClipConfig, SiglipConfig
from crossalign.numkit import Rng
from crossalign.services.training_service import GRAD_CHECK_TOLERANCE, GradCheckConfig, grad_check


def configure(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seeds", default="1,2,3", help="comma-separated seeds")
    parser.add_argument("--tolerance", type=float, default=GRAD_CHECK_TOLERANCE,
                        help="maximum accepted relative error")
    parser.add_argument("--projection", choices=["learned", "identity"], default="learned")


@command("gradcheck", configure)
def cmd_gradcheck(args: argparse.Namespace, cfg: RunConfig) -> None:
    """Compare analytic and finite-difference gradients through the whole pipeline."""
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    failures = []
    for loss in (ClipConfig(), SiglipConfig(bias_learnable=True)):
        for seed in seeds:
            report = grad_check(GradCheckConfig(loss=loss, projection=args.projection), Rng(seed))
            status = "ok" if report.passed(args.tolerance) else "FAIL"
            print(f"{loss.name}\tseed={seed}\tmax_rel_err={report.worst:.3e}\t{status}")
            if status != "ok":
                worst_group = max(report.max_relative_error, key=report.max_relative_error.get)
                failures.append(f"{loss.name}/seed {seed}/{worst_group}")
    if failures:
        raise CrossAlignError(f"gradient check failed: {', '.join(failures)}")
