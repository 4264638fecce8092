from .schedule import Schedule, ScheduleConfig
from .shapes import CLASSES, N_CLASSES, class_id, sample_batch, sample_image, template_bank
from .model import ModelConfig, denoiser_rows, guided_eps, init_model, time_features
from .sampling import (
    Trajectory,
    replay_trajectory,
    reverse_step_mean,
    sample_pair,
    sample_trajectory,
    trajectory_from_tensors,
    trajectory_to_tensors,
)
from .pretrain import PretrainConfig, pretrain, pretrain_loss

__all__ = [
    "Schedule", "ScheduleConfig",
    "CLASSES", "N_CLASSES", "class_id", "sample_batch", "sample_image", "template_bank",
    "ModelConfig", "denoiser_rows", "guided_eps", "init_model", "time_features",
    "Trajectory", "replay_trajectory", "reverse_step_mean", "sample_pair",
    "sample_trajectory", "trajectory_from_tensors", "trajectory_to_tensors",
    "PretrainConfig", "pretrain", "pretrain_loss",
]
