from .dataset_service import SynthSpec, generate_synthetic, split, build_batch, make_batches
from .retrieval_service import (
    embed_bank,
    embed_pair_banks,
    recall_at_k,
    top_k,
    export_similarity,
    export_embeddings,
    read_embeddings,
)
from .training_service import (
    AdamConfig,
    AdamState,
    AlignmentModel,
    TrainConfig,
    adam_step,
    fit,
    train,
    grad_check,
    save_model,
    load_model,
)
from .ablation_service import AblationSpec, run_ablation

__all__ = [
    "SynthSpec",
    "generate_synthetic",
    "split",
    "build_batch",
    "make_batches",
    "embed_bank",
    "embed_pair_banks",
    "recall_at_k",
    "top_k",
    "export_similarity",
    "export_embeddings",
    "read_embeddings",
    "AdamConfig",
    "AdamState",
    "AlignmentModel",
    "TrainConfig",
    "adam_step",
    "fit",
    "train",
    "grad_check",
    "save_model",
    "load_model",
    "AblationSpec",
    "run_ablation",
]
