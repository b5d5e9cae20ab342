#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
估计网络 E_θE

五层全卷积网络，步长 1、same 填充；前四层 conv -> BN -> leaky-ReLU，
第五层 conv -> 通道 softmax，输出与输入同尺寸的三类概率图。
"""
from typing import Optional

from ribcage_seg.errors import ShapeError
from ribcage_seg.networks.layers import conv_block_forward
from ribcage_seg.networks.params import Binder, EstimatorParams
from ribcage_seg.tensor.core import Tensor
from ribcage_seg.tensor.ops import conv2d, softmax_channels


def min_input_size(params: EstimatorParams) -> int:
    """最大卷积核尺寸即最小输入边长"""
    return max(k for k, _ in params.config.layers)


def estimator_forward(params: EstimatorParams, image: Tensor, mode: str = "train",
                      bind: Optional[Binder] = None, track_stats: bool = True) -> Tensor:
    """
    估计网络前向

    Args:
        params: θ_E
        image: 归一化后的灰度图 B×H×W×1
        mode: "train" 用批统计量，"infer" 用运行统计量
        bind: 参数绑定器（需要 θ_E 的梯度时传入带图的 Binder）
        track_stats: train 模式下是否更新 BN 运行统计量

    Returns:
        Tensor: B×H×W×3，每个像素三类概率之和为 1

    Raises:
        ShapeError: 输入不是 B×H×W×Cin，或 H/W 小于最大卷积核
    """
    cfg = params.config
    if len(image.shape) != 4 or image.shape[-1] != cfg.in_channels:
        raise ShapeError(f"估计网络输入必须是 B×H×W×{cfg.in_channels}，实际形状 {image.shape}")
    smallest = min_input_size(params)
    _, height, width, _ = image.shape
    if height < smallest or width < smallest:
        raise ShapeError(f"估计网络输入至少 {smallest}×{smallest}，实际 {height}×{width}")

    bind = bind or Binder()
    x = image
    for layer in params.layers:
        x = conv_block_forward(layer, x, 1, mode, cfg.slope, bind, track_stats)
    logits = conv2d(x, bind(params.head.kernel), bind(params.head.bias), stride=1, padding="same")
    return softmax_channels(logits)
