from __future__ import annotations

import argparse
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from crossalign.config import RunConfig
from crossalign.exceptions import ValidationError
from crossalign.models import PairedRecord
from crossalign.services.dataset_service import split


# ------------------------------------
# Command registry
# ------------------------------------
Handler = Callable[[argparse.Namespace, RunConfig], None]
Configurer = Callable[[argparse.ArgumentParser], None]


@dataclass
class Command:
    name: str
    handler: Handler
    help: str = ""
    configure: Optional[Configurer] = field(default=None)


_COMMANDS: Dict[str, Command] = {}


def command(name: str, configure: Optional[Configurer] = None) -> Callable[[Handler], Handler]:
    """Registers a subcommand handler; its docstring becomes the subcommand help."""

    def decorator(func: Handler) -> Handler:
        help_text = (func.__doc__ or "").strip().splitlines()[0] if func.__doc__ else ""
        _COMMANDS[name] = Command(name=name, handler=func, help=help_text, configure=configure)
        func._command_name = name
        return func

    return decorator


def get_commands() -> List[Command]:
    return list(_COMMANDS.values())


def get_command(name: str) -> Command:
    return _COMMANDS[name]


# ------------------------------------
# Shared flag groups
# ------------------------------------
# Flags never carry defaults: unset flags must not override the config file.
def _flag(parser: argparse.ArgumentParser, *names: str, **kwargs) -> None:
    parser.add_argument(*names, default=argparse.SUPPRESS, **kwargs)


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got '{text}'")


def add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--dataset", help="PAE1 dataset path (DATASET)")
    _flag(parser, "--seed", type=int, help="seed for synthesis, splits and initialisation (SEED)")


def add_synth_flags(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--pairs", type=int, help="number of synthetic pairs (PAIRS)")
    _flag(parser, "--latent", type=int, help="planted latent dimension (LATENT)")
    _flag(parser, "--dp", type=int, help="sequence token width (DP)")
    _flag(parser, "--ds", type=int, help="structure token width (DS)")
    _flag(parser, "--t-min", dest="t_min", type=int, help="minimum tokens per record (T_MIN)")
    _flag(parser, "--t-max", dest="t_max", type=int, help="maximum tokens per record (T_MAX)")
    _flag(parser, "--noise", type=float, help="token noise standard deviation (NOISE)")


def add_split_flags(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--split-train", dest="split_train", type=float, help="train fraction (SPLIT_TRAIN)")
    _flag(parser, "--split-val", dest="split_val", type=float, help="validation fraction (SPLIT_VAL)")
    _flag(parser, "--split-test", dest="split_test", type=float, help="test fraction (SPLIT_TEST)")


def add_train_flags(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--output-dir", dest="output_dir", help="run output directory (OUTPUT_DIR)")
    _flag(parser, "--checkpoint", help="checkpoint path, default OUTPUT_DIR/checkpoint.bin (CHECKPOINT)")
    _flag(parser, "--loss", choices=["clip", "siglip"], help="contrastive objective (LOSS)")
    _flag(parser, "--tau", type=float, help="temperature (TAU)")
    _flag(parser, "--bias", type=float, help="SigLIP bias b (BIAS)")
    _flag(parser, "--bias-learnable", dest="bias_learnable", type=_bool, help="learn the SigLIP bias (BIAS_LEARNABLE)")
    _flag(parser, "--batch-size", dest="batch_size", type=int, help="mini-batch size (BATCH_SIZE)")
    _flag(parser, "--epochs", type=int, help="training epochs (EPOCHS)")
    _flag(parser, "--lr", type=float, help="Adam learning rate (LR)")
    _flag(parser, "--dim", type=int, help="aligned embedding width (DIM)")
    _flag(parser, "--heads", type=int, help="attention heads (HEADS)")
    _flag(parser, "--eval-every", dest="eval_every", type=int, help="validation interval in epochs (EVAL_EVERY)")
    _flag(parser, "--projection", choices=["learned", "identity"], help="attention projections (PROJECTION)")


def add_eval_flags(parser: argparse.ArgumentParser) -> None:
    _flag(parser, "--output-dir", dest="output_dir", help="run output directory (OUTPUT_DIR)")
    _flag(parser, "--checkpoint", help="checkpoint path, default OUTPUT_DIR/checkpoint.bin (CHECKPOINT)")
    parser.add_argument(
        "--direction", choices=["seq2struct", "struct2seq"], default="seq2struct",
        help="query modality to corpus modality",
    )


def add_subset_flag(parser: argparse.ArgumentParser, default: str) -> None:
    parser.add_argument(
        "--subset", choices=list(SUBSETS), default=default,
        help=f"which split to evaluate on (default {default})",
    )


# ------------------------------------
# Shared loading
# ------------------------------------
SUBSETS = ("train", "val", "test", "all")


def load_records(cfg: RunConfig) -> List[PairedRecord]:
    cfg.require_files(cfg.dataset)
    records = cfg.create_dataset_adapter().read()
    if not records:
        raise ValidationError(f"dataset {cfg.dataset} has no records")
    return records


def load_subset(cfg: RunConfig, subset: str) -> List[PairedRecord]:
    """The records of one split, reproduced from the config's fractions and seed."""
    records = load_records(cfg)
    if subset == "all":
        return records
    train, val, test = split(records, cfg.split_fractions(), cfg.seed)
    chosen = {"train": train, "val": val, "test": test}[subset]
    if not chosen:
        raise ValidationError(f"the {subset} split of {cfg.dataset} is empty")
    return chosen


# Registers every subcommand.
from . import gen, train, evaluate, retrieve, ablate, gradcheck  # noqa: E402,F401

__all__ = [
    "Command",
    "command",
    "get_commands",
    "get_command",
    "add_dataset_flags",
    "add_synth_flags",
    "add_split_flags",
    "add_train_flags",
    "add_eval_flags",
    "add_subset_flag",
    "load_records",
    "load_subset",
]
