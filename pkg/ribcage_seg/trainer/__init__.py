"""对抗训练模块 - 损失、Adam、训练循环与检查点"""
from ribcage_seg.trainer.adam import AdamState, adam_update
from ribcage_seg.trainer.checkpoint import FORMAT_VERSION, checkpoint_load, checkpoint_save
from ribcage_seg.trainer.losses import (
    LOG_EPS,
    clamp_probability,
    loss_cross_entropy,
    loss_discriminator,
    loss_estimator,
)
from ribcage_seg.trainer.loop import (
    LOSS_COLUMNS,
    TrainConfig,
    TrainState,
    evaluate_objectives,
    history_frame,
    init_state,
    normalize_image,
    run_training,
    sample_batch,
    save_loss_csv,
    train_step,
    training_pool,
)

__all__ = [
    "AdamState", "adam_update", "FORMAT_VERSION", "checkpoint_load", "checkpoint_save",
    "LOG_EPS", "clamp_probability", "loss_cross_entropy", "loss_discriminator", "loss_estimator",
    "LOSS_COLUMNS", "TrainConfig", "TrainState", "evaluate_objectives", "history_frame",
    "init_state", "normalize_image", "run_training", "sample_batch", "save_loss_csv",
    "train_step", "training_pool",
]
