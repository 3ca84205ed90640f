from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Any, Dict, Literal, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError
from pydantic import field_validator, model_validator

from crossalign.adapters.pae1_adapter import PAE1DatasetAdapter
from crossalign.exceptions import ConfigurationError, StorageError
from crossalign.losses import make_loss_config
from crossalign.services.dataset_service import SynthSpec
from crossalign.services.training_service import AdamConfig, TrainConfig

CONFIG_ENV_KEY = "CROSSALIGN_CONFIG"
CHECKPOINT_NAME = "checkpoint.bin"
RUN_CONFIG_NAME = "config.env"

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    """
    Everything one run needs: dataset synthesis, split, model, loss, optimizer and paths.

    Read from a flat KEY=value file; command-line flags override file values.
    """

    model_config = ConfigDict(extra="forbid", validate_assignment=True, frozen=False)

    dataset: Path = Path("data/synthetic.pae")
    output_dir: Path = Path("runs/default")
    checkpoint: Optional[Path] = None

    seed: int = Field(default=7, ge=0, lt=2**64)
    pairs: int = Field(default=512, ge=1)
    latent: int = Field(default=16, ge=1)
    dp: int = Field(default=64, ge=1)
    ds: int = Field(default=32, ge=1)
    t_min: int = Field(default=4, ge=1)
    t_max: int = Field(default=12, ge=1)
    noise: float = Field(default=0.1, ge=0)

    loss: Literal["clip", "siglip"] = "clip"
    tau: float = Field(default=0.07, gt=0)
    bias: float = -10.0
    bias_learnable: bool = False

    batch_size: int = Field(default=64, ge=1)
    epochs: int = Field(default=200, ge=0)
    lr: float = Field(default=0.001, ge=0)
    dim: int = Field(default=128, ge=1)
    heads: int = Field(default=4, ge=1)
    eval_every: int = Field(default=10, ge=1)
    projection: Literal["learned", "identity"] = "learned"

    split_train: float = Field(default=0.75, ge=0, le=1)
    split_val: float = Field(default=0.0, ge=0, le=1)
    split_test: float = Field(default=0.25, ge=0, le=1)

    k: Tuple[int, ...] = (1, 5)
    workers: int = Field(default=1, ge=1)

    @field_validator("loss", "projection", mode="before")
    @classmethod
    def _lower(cls, value: Any) -> Any:
        return value.strip().lower() if isinstance(value, str) else value

    @field_validator("k", mode="before")
    @classmethod
    def _parse_k(cls, value: Any) -> Any:
        if isinstance(value, str):
            parts = [p.strip() for p in value.split(",") if p.strip()]
            if not parts:
                raise ValueError("k needs at least one value")
            return tuple(int(p) for p in parts)
        if isinstance(value, int):
            return (value,)
        return value

    @field_validator("k")
    @classmethod
    def _check_k(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value or any(k < 1 for k in value):
            raise ValueError(f"every k must be at least 1, got {value}")
        return value

    @model_validator(mode="after")
    def _check_consistency(self) -> RunConfig:
        if self.dim % self.heads:
            raise ValueError(f"dim {self.dim} is not divisible by heads {self.heads}")
        if self.t_min > self.t_max:
            raise ValueError(f"t_min {self.t_min} exceeds t_max {self.t_max}")
        if self.split_train + self.split_val + self.split_test > 1.0 + 1e-9:
            raise ValueError("split fractions sum to more than 1")
        return self

    # --- domain configs ---

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(
            n_pairs=self.pairs,
            latent_dim=self.latent,
            d_p=self.dp,
            d_s=self.ds,
            t_range=(self.t_min, self.t_max),
            noise_sigma=self.noise,
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            loss=make_loss_config(self.loss, self.tau, self.bias, self.bias_learnable),
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            dim=self.dim,
            heads=self.heads,
            eval_every=self.eval_every,
            adam=AdamConfig(lr=self.lr),
            projection=self.projection,
        )

    def split_fractions(self) -> Tuple[float, float, float]:
        return self.split_train, self.split_val, self.split_test

    def checkpoint_path(self) -> Path:
        return self.checkpoint if self.checkpoint is not None else self.output_dir / CHECKPOINT_NAME

    def create_dataset_adapter(self) -> PAE1DatasetAdapter:
        return PAE1DatasetAdapter(self.dataset)

    def require_files(self, *paths: Path) -> None:
        for path in paths:
            if not Path(path).is_file():
                raise StorageError(f"required file not found: {path}")

    def updated(self, **changes: Any) -> RunConfig:
        """A validated copy with `changes` applied."""
        try:
            return RunConfig.model_validate({**self.model_dump(), **changes})
        except PydanticValidationError as e:
            raise ConfigurationError(_describe(e)) from e

    def to_env(self) -> Dict[str, str]:
        env: Dict[str, str] = {}
        for name, value in self.model_dump().items():
            if value is None:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, tuple):
                text = ",".join(str(v) for v in value)
            else:
                text = str(value)
            env[name.upper()] = text
        return env


def _describe(error: PydanticValidationError) -> str:
    problems = [
        f"{'.'.join(str(p) for p in e['loc']) or 'config'}: {e['msg']}" for e in error.errors()
    ]
    return "invalid configuration: " + "; ".join(problems)


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Resolves defaults < file < overrides.

    `path` falls back to the CROSSALIGN_CONFIG environment variable; keys are case-insensitive.
    """
    values: Dict[str, Any] = {}
    path = path or os.getenv(CONFIG_ENV_KEY)
    if path:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        for key, value in dotenv_values(path).items():
            if value is None:
                raise ConfigurationError(f"{path}: key '{key}' has no value")
            values[key.strip().lower()] = value
        logger.debug(f"Loaded {len(values)} keys from {path}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return RunConfig.model_validate(values)
    except PydanticValidationError as e:
        raise ConfigurationError(_describe(e)) from e


def write_run_config(cfg: RunConfig, path: Union[str, Path]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{k}={v}\n" for k, v in cfg.to_env().items()), encoding="utf-8")
    except OSError as e:
        raise StorageError(f"cannot write {path}: {e}") from e


_CONFIG: Optional[RunConfig] = None


def get_config() -> RunConfig:
    global _CONFIG
    if _CONFIG is None:
        _CONFIG = load_run_config()
    return _CONFIG


def set_config(config: Optional[RunConfig]) -> None:
    global _CONFIG
    _CONFIG = config
