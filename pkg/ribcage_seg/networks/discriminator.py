#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Rib Cage 判别网络 D_θD

三个 Rib Cage block（每个三入三出，步长 2）-> 融合卷积（步长 2）-> 展平
-> FC(64)+leaky -> FC(64)+leaky -> FC(1)+sigmoid
"""
from typing import Optional, Tuple

from ribcage_seg.errors import ShapeError
from ribcage_seg.networks.layers import conv_block_forward
from ribcage_seg.networks.params import Binder, DiscriminatorParams, RibCageBlockParams
from ribcage_seg.tensor.core import Tensor
from ribcage_seg.tensor.ops import concat_channels, flatten, fully_connected, leaky_relu, sigmoid


def ribcage_block_forward(block: RibCageBlockParams, gl_in: Tensor, seg_in: Tensor,
                          spine_in: Optional[Tensor] = None, mode: str = "train",
                          slope: float = 0.2, bind: Optional[Binder] = None,
                          track_stats: bool = True) -> Tuple[Tensor, Tensor, Tensor]:
    """
    单个 Rib Cage block

    gl_out = rib(gl_in)，seg_out = rib(seg_in)，
    spine_out = spine(concat(gl_in, seg_in, spine_in))；第一个 block 没有 spine_in

    Args:
        block: block 参数
        gl_in: 灰度流输入
        seg_in: 分割流输入
        spine_in: 上一个 block 的 spine 输出（第一个 block 为 None）
        mode: "train" / "infer"
        slope: leaky-ReLU 斜率
        bind: 参数绑定器
        track_stats: 是否更新 BN 运行统计量

    Returns:
        (gl_out, seg_out, spine_out)

    Raises:
        ShapeError: 各流空间尺寸不一致
    """
    if gl_in.shape[:3] != seg_in.shape[:3]:
        raise ShapeError(f"Rib Cage 输入空间尺寸不一致: gl {gl_in.shape[:3]} vs seg {seg_in.shape[:3]}")
    if spine_in is not None and spine_in.shape[:3] != gl_in.shape[:3]:
        raise ShapeError(f"Rib Cage spine 输入尺寸 {spine_in.shape[:3]} 与 gl {gl_in.shape[:3]} 不一致")

    bind = bind or Binder()
    gl_out = conv_block_forward(block.gl_rib, gl_in, 2, mode, slope, bind, track_stats)
    seg_out = conv_block_forward(block.seg_rib, seg_in, 2, mode, slope, bind, track_stats)
    streams = (gl_in, seg_in) if spine_in is None else (gl_in, seg_in, spine_in)
    spine_out = conv_block_forward(block.spine, concat_channels(*streams), 2, mode, slope, bind, track_stats)
    return gl_out, seg_out, spine_out


def discriminator_forward(params: DiscriminatorParams, image: Tensor, seg: Tensor, mode: str = "train",
                          bind: Optional[Binder] = None, track_stats: bool = True) -> Tensor:
    """
    判别网络前向：输出 (I, Γ) 为人工标注的概率

    Args:
        params: θ_D
        image: 归一化灰度图 B×S×S×1
        seg: 分割（one-hot 或概率图）B×S×S×3
        mode: "train" / "infer"
        bind: 参数绑定器
        track_stats: 是否更新 BN 运行统计量

    Returns:
        Tensor: B×1，取值在 (0,1)

    Raises:
        ShapeError: 输入尺寸不是 input_size×input_size 或通道数不对
    """
    cfg = params.config
    size = cfg.input_size
    expected_image = (size, size, cfg.image_channels)
    expected_seg = (size, size, cfg.seg_channels)
    if len(image.shape) != 4 or image.shape[1:] != expected_image:
        raise ShapeError(f"判别网络灰度输入应为 B×{size}×{size}×{cfg.image_channels}，实际 {image.shape}")
    if len(seg.shape) != 4 or seg.shape[1:] != expected_seg:
        raise ShapeError(f"判别网络分割输入应为 B×{size}×{size}×{cfg.seg_channels}，实际 {seg.shape}")
    if image.shape[0] != seg.shape[0]:
        raise ShapeError(f"判别网络 batch 不一致: {image.shape[0]} vs {seg.shape[0]}")

    bind = bind or Binder()
    gl, sg, spine = image, seg, None
    for block in params.blocks:
        gl, sg, spine = ribcage_block_forward(block, gl, sg, spine, mode, cfg.slope, bind, track_stats)

    x = conv_block_forward(params.fusion, concat_channels(gl, sg, spine), 2, mode, cfg.slope, bind, track_stats)
    x = flatten(x)
    last = len(params.fc) - 1
    for i, dense in enumerate(params.fc):
        x = fully_connected(x, bind(dense.weights), bind(dense.bias))
        x = sigmoid(x) if i == last else leaky_relu(x, cfg.slope)
    return x
