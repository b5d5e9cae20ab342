#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
数据模型定义
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ribcage_seg.errors import ShapeError

BACKGROUND, NUCLEUS, CONTOUR = 0, 1, 2
NUM_CLASSES = 3


@dataclass
class SegmentationMap:
    """三类分割图 Γ: Ω -> {0 背景, 1 细胞核, 2 核轮廓}"""
    classes: np.ndarray              # H×W, uint8

    def __post_init__(self):
        self.classes = np.asarray(self.classes, dtype=np.uint8)
        if self.classes.ndim != 2:
            raise ShapeError(f"分割图必须是 H×W，实际形状 {self.classes.shape}")
        if self.classes.size and self.classes.max() >= NUM_CLASSES:
            raise ShapeError(f"分割图类别必须在 0..2 内，出现 {int(self.classes.max())}")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.classes.shape

    def one_hot(self) -> np.ndarray:
        """H×W×3 的 one-hot 浮点图"""
        return np.eye(NUM_CLASSES)[self.classes]

    def histogram(self) -> np.ndarray:
        return np.bincount(self.classes.ravel(), minlength=NUM_CLASSES)

    def __eq__(self, other):
        return isinstance(other, SegmentationMap) and np.array_equal(self.classes, other.classes)


@dataclass
class LabeledSample:
    """图像 I 与人工/合成分割 Γ_M"""
    image: np.ndarray                # H×W 灰度强度
    label: SegmentationMap
    touching: Optional[List[Tuple[int, int]]] = None   # 合成时设计的相贴实例对；None 为未知

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        if self.image.shape != self.label.shape:
            raise ShapeError(f"图像 {self.image.shape} 与标签 {self.label.shape} 尺寸不一致")


@dataclass
class InstanceMap:
    """实例图：0 为背景/轮廓，细胞编号连续 1..k"""
    ids: np.ndarray                  # H×W, int
    count: int

    @property
    def shape(self) -> Tuple[int, int]:
        return self.ids.shape


@dataclass
class MatchResult:
    """预测实例与人工实例的匹配结果"""
    n_pred: int
    n_gt: int
    pairs: List[Tuple[int, int, float]] = field(default_factory=list)  # (gt_id, pred_id, jaccard)，只含 TP

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def fp(self) -> int:
        return self.n_pred - self.tp

    @property
    def fn(self) -> int:
        return self.n_gt - self.tp


@dataclass
class Metrics:
    """实例级指标"""
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_measure: float
    mean_jaccard: float
    pixel_accuracy: float = math.nan

    def to_dict(self) -> dict:
        """转换为字典格式"""
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f": self.f_measure,
            "mean_jaccard": self.mean_jaccard,
            "pixel_accuracy": self.pixel_accuracy,
        }


@dataclass
class LossRecord:
    """一步训练的 loss 记录"""
    step: int
    loss_d: float                    # L_D（交叉熵模式下为 NaN）
    loss_e: float                    # L_E（交叉熵模式下为 CE loss）
    d_real_mean: float
    d_fake_mean: float
    pixel_accuracy: float            # 估计网络 argmax 与 batch 标签一致的像素比例

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "loss_d": self.loss_d,
            "loss_e": self.loss_e,
            "d_real_mean": self.d_real_mean,
            "d_fake_mean": self.d_fake_mean,
            "pixel_accuracy": self.pixel_accuracy,
        }
