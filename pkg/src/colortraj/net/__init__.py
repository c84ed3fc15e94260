from .models import (
    ENCODER_MODES,
    MULTI_MODAL,
    TABULAR,
    BaselineParams,
    EncoderParams,
    baseline_rollout,
    baseline_rollout_batch,
    encode_image,
    encode_tabular,
    load_checkpoint,
    predict_coefficients,
    predict_trajectory,
    prepare_image,
    save_checkpoint,
)
from .train import History, TrainConfig, train_baseline, train_encoder

__all__ = [
    "ENCODER_MODES",
    "MULTI_MODAL",
    "TABULAR",
    "BaselineParams",
    "EncoderParams",
    "History",
    "TrainConfig",
    "baseline_rollout",
    "baseline_rollout_batch",
    "encode_image",
    "encode_tabular",
    "load_checkpoint",
    "predict_coefficients",
    "predict_trajectory",
    "prepare_image",
    "save_checkpoint",
    "train_baseline",
    "train_encoder",
]
