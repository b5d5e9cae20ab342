#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
RGB 标签编码：背景 红 / 细胞核 绿 / 核轮廓 蓝
"""
import numpy as np

from ribcage_seg.errors import LabelCodecError
from ribcage_seg.models import SegmentationMap

PALETTE = np.array([
    [255, 0, 0],    # 背景
    [0, 255, 0],    # 细胞核
    [0, 0, 255],    # 核轮廓
], dtype=np.uint8)


def encode_rgb(label: SegmentationMap) -> np.ndarray:
    """
    分割图 -> RGB 图

    Args:
        label: 三类分割图

    Returns:
        np.ndarray: H×W×3 uint8
    """
    return PALETTE[label.classes]


def decode_rgb(rgb: np.ndarray) -> SegmentationMap:
    """
    RGB 图 -> 分割图

    Args:
        rgb: H×W×3 uint8，每个像素必须恰好是三种颜色之一

    Returns:
        SegmentationMap

    Raises:
        LabelCodecError: 形状不对，或出现调色板之外的颜色（报告第一个坏像素坐标）
    """
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise LabelCodecError(f"RGB 标签必须是 H×W×3，实际形状 {rgb.shape}")

    classes = np.full(rgb.shape[:2], 255, dtype=np.uint8)
    for cls, color in enumerate(PALETTE):
        classes[np.all(rgb == color, axis=-1)] = cls

    bad = np.argwhere(classes == 255)
    if bad.size:
        row, col = (int(v) for v in bad[0])
        raise LabelCodecError(
            f"标签像素 (row={row}, col={col}) 颜色 {tuple(int(c) for c in rgb[row, col])} "
            f"不是 红/绿/蓝 之一（共 {len(bad)} 个坏像素）"
        )
    return SegmentationMap(classes)
