#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
对抗训练循环

每一步从训练集抽取一个 batch（样本下标和增强种子都来自状态 RNG），
先做 d_steps_per_e_step 次判别网络更新，再做一次估计网络更新。
交叉熵模式只更新估计网络，判别网络相关的列记为 NaN。
"""
import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from ribcage_seg.data.augment import augment
from ribcage_seg.errors import ConfigError, DataError, NonFiniteError, TrainingDiverged
from ribcage_seg.evaluation.metrics import batch_pixel_accuracy
from ribcage_seg.log import get_logger
from ribcage_seg.models import LabeledSample, LossRecord
from ribcage_seg.networks import (
    Binder,
    DiscriminatorConfig,
    DiscriminatorParams,
    EstimatorConfig,
    EstimatorParams,
    discriminator_forward,
    estimator_forward,
    init_params,
)
from ribcage_seg.tensor.core import Graph, backward, constant
from ribcage_seg.tensor.ops import neg
from ribcage_seg.trainer.adam import AdamState, adam_update
from ribcage_seg.trainer.losses import (
    clamp_probability,
    loss_cross_entropy,
    loss_discriminator,
    loss_estimator,
)

logger = get_logger(__name__)

MODES = ("adversarial", "cross_entropy")
LOSS_COLUMNS = ["step", "loss_d", "loss_e", "d_real_mean", "d_fake_mean", "pixel_accuracy"]
STD_FLOOR = 1e-8

Batch = Tuple[np.ndarray, np.ndarray]


@dataclass
class TrainConfig:
    """训练超参数"""
    n_train: int = 1                 # 参与训练的标注样本数（清单中的前 n_train 个）
    batch_size: int = 4
    total_steps: int = 2000
    d_steps_per_e_step: int = 1
    lr_d: float = 1e-4
    lr_e: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    crop_size: int = 64
    seed: int = 0
    checkpoint_interval: int = 500
    log_interval: int = 50
    mode: str = "adversarial"

    def validate(self) -> None:
        for name in ("n_train", "batch_size", "total_steps", "d_steps_per_e_step",
                     "crop_size", "checkpoint_interval", "log_interval"):
            value = getattr(self, name)
            if value <= 0:
                raise ConfigError(f"train.{name} 必须为正整数，实际 {value}")
        for name in ("lr_d", "lr_e", "adam_eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"train.{name} 必须为正数，实际 {getattr(self, name)}")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"train.{name} 必须在 [0, 1) 内，实际 {getattr(self, name)}")
        if self.mode not in MODES:
            raise ConfigError(f"train.mode 必须是 {MODES} 之一，实际 {self.mode!r}")


@dataclass
class TrainState:
    """可恢复的训练状态（检查点保存的全部内容）"""
    config: TrainConfig
    estimator: EstimatorParams
    discriminator: DiscriminatorParams
    adam_e: AdamState
    adam_d: AdamState
    rng: np.random.Generator
    step: int = 0
    history: List[LossRecord] = field(default_factory=list)


def init_state(config: TrainConfig, estimator_config: Optional[EstimatorConfig] = None,
               discriminator_config: Optional[DiscriminatorConfig] = None) -> TrainState:
    """
    由种子初始化训练状态

    θ_E、θ_D 与循环 RNG 各用 SeedSequence 派生出的独立种子

    Raises:
        ConfigError: 配置无效，或判别网络输入尺寸与裁剪尺寸不一致
    """
    config.validate()
    estimator_config = estimator_config or EstimatorConfig()
    discriminator_config = discriminator_config or DiscriminatorConfig(input_size=config.crop_size)
    if discriminator_config.input_size != config.crop_size:
        raise ConfigError(
            f"判别网络 input_size={discriminator_config.input_size} 与 crop_size={config.crop_size} 不一致"
        )
    e_seq, d_seq, loop_seq = np.random.SeedSequence(config.seed).spawn(3)
    estimator = init_params(int(e_seq.generate_state(1)[0]), estimator_config)
    discriminator = init_params(int(d_seq.generate_state(1)[0]), discriminator_config)
    return TrainState(
        config=config,
        estimator=estimator,
        discriminator=discriminator,
        adam_e=AdamState.fresh(estimator.named_parameters()),
        adam_d=AdamState.fresh(discriminator.named_parameters()),
        rng=np.random.default_rng(loop_seq),
    )


# ==================== 数据 ====================

def normalize_image(image: np.ndarray) -> np.ndarray:
    """逐图归一化到零均值、单位方差（标准差下限 1e-8）"""
    image = np.asarray(image, dtype=np.float64)
    return (image - image.mean()) / max(float(image.std()), STD_FLOOR)


def training_pool(config: TrainConfig, samples: Sequence[LabeledSample]) -> List[LabeledSample]:
    """
    取前 n_train 个样本作为训练集

    Raises:
        DataError: 样本数不足，或样本小于裁剪尺寸
    """
    if len(samples) < config.n_train:
        raise DataError(f"数据集只有 {len(samples)} 个样本，少于 n_train={config.n_train}")
    pool = list(samples[:config.n_train])
    for i, sample in enumerate(pool):
        h, w = sample.label.shape
        if h < config.crop_size or w < config.crop_size:
            raise DataError(f"第 {i} 个训练样本尺寸 {h}×{w} 小于裁剪尺寸 {config.crop_size}")
    return pool


def sample_batch(state: TrainState, pool: Sequence[LabeledSample]) -> Batch:
    """
    组装一个 batch

    Returns:
        (images B×S×S×1 已归一化, one_hot B×S×S×3)
    """
    cfg = state.config
    images, targets = [], []
    for _ in range(cfg.batch_size):
        index = int(state.rng.integers(len(pool)))
        seed = int(state.rng.integers(2 ** 63))
        crop = augment(pool[index], cfg.crop_size, seed)
        images.append(normalize_image(crop.image)[..., None])
        targets.append(crop.label.one_hot())
    return np.stack(images), np.stack(targets)


# ==================== 单步 ====================

def _discriminator_update(state: TrainState, images, targets, partial: Dict[str, float]) -> Tuple[float, float, float]:
    cfg = state.config
    # θ_E 冻结：前向不登记参数，也不改它的 BN 统计量
    fake = estimator_forward(state.estimator, images, "train", None, track_stats=False)

    graph = Graph()
    bind = Binder(graph)
    d_real = discriminator_forward(state.discriminator, images, targets, "train", bind)
    d_fake = discriminator_forward(state.discriminator, images, fake, "train", bind)
    partial["d_real_mean"] = float(d_real.value.mean())
    partial["d_fake_mean"] = float(d_fake.value.mean())
    l_d = loss_discriminator(clamp_probability(d_real), clamp_probability(d_fake))
    partial["loss_d"] = l_d.item()

    grads = backward(graph, neg(l_d))
    named = state.discriminator.named_parameters()
    adam_update(named, bind.gradients(grads, named), state.adam_d,
                cfg.lr_d, cfg.beta1, cfg.beta2, cfg.adam_eps, state.adam_d.step + 1)
    return partial["loss_d"], partial["d_real_mean"], partial["d_fake_mean"]


def _estimator_update(state: TrainState, images, targets, partial: Dict[str, float]) -> float:
    cfg = state.config
    graph = Graph()
    bind = Binder(graph)
    probs = estimator_forward(state.estimator, images, "train", bind)
    partial["pixel_accuracy"] = batch_pixel_accuracy(probs.value, targets.value)
    if cfg.mode == "cross_entropy":
        objective = loss_cross_entropy(probs, targets.value)
        partial["loss_e"] = objective.item()
    else:
        # θ_D 冻结
        d_fake = discriminator_forward(state.discriminator, images, probs, "train", None, track_stats=False)
        l_e = loss_estimator(clamp_probability(d_fake))
        partial["loss_e"] = l_e.item()
        objective = neg(l_e)

    grads = backward(graph, objective)
    named = state.estimator.named_parameters()
    adam_update(named, bind.gradients(grads, named), state.adam_e,
                cfg.lr_e, cfg.beta1, cfg.beta2, cfg.adam_eps, state.adam_e.step + 1)
    return partial["loss_e"]


def _write_dump(state: TrainState, step: int, partial: Dict[str, float], reason: str,
                dump_dir: Optional[Path]) -> Optional[Path]:
    if dump_dir is None:
        return None
    norms = {}
    for prefix, params in (("estimator", state.estimator), ("discriminator", state.discriminator)):
        for name, array in params.named_parameters().items():
            norms[f"{prefix}.{name}"] = float(np.linalg.norm(array))
    path = Path(dump_dir) / f"diverged_step_{step}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"step": step, "reason": reason, "partial_losses": partial, "parameter_norms": norms},
                  f, indent=2, ensure_ascii=False)
    return path


def train_step(state: TrainState, batch: Batch, dump_dir: Optional[Union[str, Path]] = None) -> LossRecord:
    """
    执行一个训练步（原地更新 state）

    Args:
        state: 训练状态
        batch: sample_batch() 的结果
        dump_dir: 发散时写诊断文件的目录

    Returns:
        LossRecord

    Raises:
        TrainingDiverged: 任一前向值或 loss 出现 NaN/Inf
    """
    cfg = state.config
    step = state.step + 1
    images, targets = constant(batch[0]), constant(batch[1])
    partial: Dict[str, float] = {}
    # 发散时回滚到本步开始前，已做完的判别网络更新也撤销
    snapshot = copy.deepcopy((state.estimator, state.discriminator, state.adam_e, state.adam_d))

    try:
        if cfg.mode == "cross_entropy":
            loss_d = d_real_mean = d_fake_mean = math.nan
        else:
            for _ in range(cfg.d_steps_per_e_step):
                loss_d, d_real_mean, d_fake_mean = _discriminator_update(state, images, targets, partial)
        loss_e = _estimator_update(state, images, targets, partial)
    except NonFiniteError as e:
        state.estimator, state.discriminator, state.adam_e, state.adam_d = snapshot
        path = _write_dump(state, step, partial, str(e), Path(dump_dir) if dump_dir else None)
        logger.error(f"❌ 训练在第 {step} 步发散: {e}")
        raise TrainingDiverged(f"训练在第 {step} 步发散: {e}", step, path) from e

    record = LossRecord(step, loss_d, loss_e, d_real_mean, d_fake_mean, partial["pixel_accuracy"])
    state.step = step
    state.history.append(record)
    return record


def evaluate_objectives(state: TrainState, batch: Batch) -> Tuple[float, float]:
    """
    在给定 batch 上计算 (L_D, L_E)，不更新任何参数或统计量

    两个网络都用 train 模式的批统计量，与训练步里的前向一致
    """
    images, targets = constant(batch[0]), constant(batch[1])
    fake = estimator_forward(state.estimator, images, "train", None, track_stats=False)
    d_real = discriminator_forward(state.discriminator, images, targets, "train", None, track_stats=False)
    d_fake = discriminator_forward(state.discriminator, images, fake, "train", None, track_stats=False)
    l_d = loss_discriminator(clamp_probability(d_real), clamp_probability(d_fake))
    l_e = loss_estimator(clamp_probability(d_fake))
    return l_d.item(), l_e.item()


# ==================== 循环 ====================

def history_frame(history: Sequence[LossRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in history], columns=LOSS_COLUMNS)


def save_loss_csv(history: Sequence[LossRecord], path: Union[str, Path]) -> Path:
    """loss 历史导出为 CSV（step,loss_d,loss_e,d_real_mean,d_fake_mean,pixel_accuracy）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    history_frame(history).to_csv(path, index=False)
    return path


def run_training(config: TrainConfig, samples: Sequence[LabeledSample], state: Optional[TrainState] = None,
                 run_dir: Optional[Union[str, Path]] = None,
                 on_checkpoint: Optional[Callable[[TrainState, Path], None]] = None,
                 progress: bool = False) -> TrainState:
    """
    训练到 config.total_steps

    Args:
        config: 训练配置（恢复训练时覆盖检查点里的配置）
        samples: 数据集，使用前 n_train 个
        state: 从检查点恢复的状态；None 表示从头开始
        run_dir: 输出目录；给出时每 checkpoint_interval 步及结束时写检查点，并导出 loss CSV
        on_checkpoint: 每写一个检查点后的回调
        progress: 是否显示 tqdm 进度条

    Returns:
        TrainState
    """
    from ribcage_seg.trainer.checkpoint import checkpoint_save

    config.validate()
    if state is None:
        state = init_state(config)
    else:
        state.config = config
    pool = training_pool(config, samples)
    run_dir = Path(run_dir) if run_dir is not None else None

    def save(name: str) -> None:
        if run_dir is None:
            return
        path = checkpoint_save(state, run_dir / name)
        if on_checkpoint is not None:
            on_checkpoint(state, path)

    remaining = max(config.total_steps - state.step, 0)
    logger.info(f"🚀 开始训练 mode={config.mode} n_train={config.n_train} "
                f"从第 {state.step} 步到第 {config.total_steps} 步")
    with tqdm(total=remaining, disable=not progress, desc="train", unit="step") as bar:
        while state.step < config.total_steps:
            record = train_step(state, sample_batch(state, pool), run_dir)
            bar.update(1)
            if record.step % config.log_interval == 0:
                logger.info(f"📊 step {record.step}: L_D={record.loss_d:.4f} L_E={record.loss_e:.4f} "
                            f"D(real)={record.d_real_mean:.3f} D(fake)={record.d_fake_mean:.3f} "
                            f"acc={record.pixel_accuracy:.4f}")
            if record.step % config.checkpoint_interval == 0:
                save(f"step_{record.step:06d}.ckpt")

    save("final.ckpt")
    if run_dir is not None:
        csv_path = save_loss_csv(state.history, run_dir / "loss.csv")
        logger.info(f"💾 loss 历史已保存: {csv_path}")
    logger.info(f"✅ 训练完成，共 {state.step} 步")
    return state
