#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
公共层组合: conv -> batchnorm -> leaky-ReLU
"""
from typing import Optional

from ribcage_seg.networks.params import Binder, ConvBlockParams
from ribcage_seg.tensor.core import Tensor
from ribcage_seg.tensor.ops import batchnorm, conv2d, leaky_relu


def conv_block_forward(block: ConvBlockParams, x: Tensor, stride: int, mode: str, slope: float,
                       bind: Optional[Binder] = None, track_stats: bool = True) -> Tensor:
    """
    卷积块前向

    Args:
        block: 卷积块参数
        x: 输入 B×H×W×C
        stride: 卷积步长
        mode: "train" / "infer"
        slope: leaky-ReLU 斜率
        bind: 参数绑定器，None 表示参数作为常量
        track_stats: train 模式下是否更新运行统计量

    Returns:
        Tensor
    """
    bind = bind or Binder()
    y = conv2d(x, bind(block.conv.kernel), bind(block.conv.bias), stride=stride, padding="same")
    state = block.bn.state if (mode == "infer" or track_stats) else None
    y = batchnorm(y, bind(block.bn.gamma), bind(block.bn.beta), state, mode)
    return leaky_relu(y, slope)
