#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
数据增强：随机裁剪 + 随机翻转 + 90° 倍数旋转

只用 90° 倍数旋转，标签不需要插值，三类约束保持不变。
"""
from dataclasses import dataclass

import numpy as np

from ribcage_seg.errors import DataError
from ribcage_seg.models import LabeledSample, SegmentationMap


@dataclass(frozen=True)
class AugmentParams:
    top: int
    left: int
    size: int
    flip_horizontal: bool = False
    flip_vertical: bool = False
    rotations: int = 0          # 逆时针 90° 的次数，0..3


def draw_augment_params(shape, crop_size: int, rng: np.random.Generator) -> AugmentParams:
    """
    抽取一组增强参数

    Raises:
        DataError: 样本小于裁剪尺寸
    """
    height, width = shape
    if height < crop_size or width < crop_size:
        raise DataError(f"样本尺寸 {height}×{width} 小于裁剪尺寸 {crop_size}")
    top = int(rng.integers(0, height - crop_size + 1))
    left = int(rng.integers(0, width - crop_size + 1))
    flip_h = bool(rng.random() < 0.5)
    flip_v = bool(rng.random() < 0.5)
    rotations = int(rng.integers(0, 4))
    return AugmentParams(top, left, crop_size, flip_h, flip_v, rotations)


def _transform(array: np.ndarray, params: AugmentParams) -> np.ndarray:
    out = array[params.top:params.top + params.size, params.left:params.left + params.size]
    if params.flip_horizontal:
        out = np.fliplr(out)
    if params.flip_vertical:
        out = np.flipud(out)
    if params.rotations:
        out = np.rot90(out, params.rotations)
    return np.ascontiguousarray(out)


def apply_augment(sample: LabeledSample, params: AugmentParams) -> LabeledSample:
    """对图像和标签施加同一个变换"""
    height, width = sample.image.shape
    if params.top + params.size > height or params.left + params.size > width:
        raise DataError(f"裁剪区域超出样本 {height}×{width}: {params}")
    return LabeledSample(
        image=_transform(sample.image, params),
        label=SegmentationMap(_transform(sample.label.classes, params)),
    )


def augment(sample: LabeledSample, crop_size: int, seed: int) -> LabeledSample:
    """
    随机裁剪 crop_size×crop_size，独立 50% 水平/垂直翻转，旋转 {0,90,180,270}°

    Args:
        sample: 原始样本
        crop_size: 裁剪边长
        seed: 随机种子

    Returns:
        LabeledSample
    """
    rng = np.random.default_rng(seed)
    params = draw_augment_params(sample.image.shape, crop_size, rng)
    return apply_augment(sample, params)
