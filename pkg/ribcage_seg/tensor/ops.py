#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
张量操作（前向 + 反向）

每个操作都在 numpy 上算前向，并把反向闭包登记进输入所在的计算图。
只有常量输入时不登记（推理路径）。
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ribcage_seg.errors import DomainError, MissingStatisticsError, ShapeError
from ribcage_seg.tensor.core import Tensor, make_output

BN_EPS = 1e-5
BN_MOMENTUM = 0.9
SIGMOID_LO = np.finfo(np.float64).tiny
SIGMOID_HI = np.nextafter(1.0, 0.0)

Scalar = Union[int, float]


def _same_padding(size: int, k: int, stride: int) -> Tuple[int, int, int]:
    """same 填充: 输出 ceil(size/stride)，多出的 1 像素放在下/右"""
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return out, total // 2, total - total // 2


# ==================== 卷积 ====================

def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, padding: str = "same") -> Tensor:
    """
    二维卷积（NHWC）

    Args:
        x: 输入 B×H×W×Cin
        kernel: 卷积核 Kh×Kw×Cin×Cout
        bias: 偏置 Cout
        stride: 步长
        padding: "same" 或 "valid"

    Returns:
        Tensor: B×Ho×Wo×Cout

    Raises:
        ShapeError: 维度不匹配
    """
    xv, kv, bv = x.value, kernel.value, bias.value
    if xv.ndim != 4:
        raise ShapeError(f"conv2d 输入必须是 B×H×W×C，实际形状 {xv.shape}")
    if kv.ndim != 4:
        raise ShapeError(f"conv2d 卷积核必须是 Kh×Kw×Cin×Cout，实际形状 {kv.shape}")
    if stride < 1:
        raise ShapeError(f"conv2d 步长必须为正整数，实际 {stride}")
    batch, height, width, cin = xv.shape
    kh, kw, k_cin, cout = kv.shape
    if cin != k_cin:
        raise ShapeError(f"conv2d 输入通道 {cin} 与卷积核 Cin={k_cin} 不一致")
    if bv.shape != (cout,):
        raise ShapeError(f"conv2d 偏置形状应为 ({cout},)，实际 {bv.shape}")

    if padding == "same":
        ho, pt, pb = _same_padding(height, kh, stride)
        wo, pl, pr = _same_padding(width, kw, stride)
    elif padding == "valid":
        pt = pb = pl = pr = 0
        ho = (height - kh) // stride + 1
        wo = (width - kw) // stride + 1
    else:
        raise ShapeError(f"未知的 padding: {padding}")

    hp, wp = height + pt + pb, width + pl + pr
    if kh > hp or kw > wp:
        raise ShapeError(f"conv2d 卷积核 {kh}×{kw} 大于填充后的输入 {hp}×{wp}")

    xp = np.pad(xv, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    span_h = stride * (ho - 1) + 1
    span_w = stride * (wo - 1) + 1
    # B×Ho×Wo×Cin×Kh×Kw 视图，不复制
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, :span_h:stride, :span_w:stride]

    out = np.tensordot(windows, kv, axes=([3, 4, 5], [2, 0, 1])) + bv

    def backward_fn(g, needs):
        gx = gk = gb = None
        if needs[1]:
            gk = np.tensordot(windows, g, axes=([0, 1, 2], [0, 1, 2])).transpose(1, 2, 0, 3)
        if needs[2]:
            gb = g.sum(axis=(0, 1, 2))
        if needs[0]:
            cols = np.tensordot(g, kv, axes=([3], [3]))     # B×Ho×Wo×Kh×Kw×Cin
            gxp = np.zeros(xp.shape)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i:i + span_h:stride, j:j + span_w:stride, :] += cols[:, :, :, i, j, :]
            gx = gxp[:, pt:pt + height, pl:pl + width, :]
        return gx, gk, gb

    return make_output("conv2d", (x, kernel, bias), out, backward_fn)


# ==================== 批归一化 ====================

@dataclass
class BatchNormState:
    """批归一化运行统计量（随检查点保存）"""
    running_mean: np.ndarray
    running_var: np.ndarray
    num_batches: int = 0

    @classmethod
    def fresh(cls, channels: int) -> "BatchNormState":
        return cls(np.zeros(channels), np.ones(channels), 0)


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, state: Optional[BatchNormState] = None,
              mode: str = "train", momentum: float = BN_MOMENTUM) -> Tensor:
    """
    批归一化（按最后一维通道，统计 batch + 空间维）

    Args:
        x: 输入张量，最后一维为通道
        gamma, beta: 每通道缩放/平移
        state: 运行统计量；train 模式传 None 表示不更新统计量
        mode: "train" 用批统计量，"infer" 用运行统计量
        momentum: running = momentum * running + (1 - momentum) * batch

    Returns:
        Tensor: 与 x 同形状

    Raises:
        ShapeError: 通道数不匹配或 train 模式下每通道样本数 < 2
        MissingStatisticsError: infer 模式下还没有运行统计量
    """
    xv, gv, bv = x.value, gamma.value, beta.value
    channels = xv.shape[-1]
    if gv.shape != (channels,) or bv.shape != (channels,):
        raise ShapeError(f"batchnorm gamma/beta 形状应为 ({channels},)，实际 {gv.shape}/{bv.shape}")
    axes = tuple(range(xv.ndim - 1))
    n = xv.size // channels

    if mode == "train":
        if n < 2:
            raise ShapeError(f"batchnorm train 模式每通道至少需要 2 个样本，实际 {n}")
        mean = xv.mean(axis=axes)
        var = xv.var(axis=axes)
        if state is not None:
            state.running_mean = momentum * state.running_mean + (1.0 - momentum) * mean
            state.running_var = momentum * state.running_var + (1.0 - momentum) * var
            state.num_batches += 1
    elif mode == "infer":
        if state is None or state.num_batches == 0:
            raise MissingStatisticsError("batchnorm 推理模式需要运行统计量，但该层从未在 train 模式下运行过")
        mean, var = state.running_mean, state.running_var
    else:
        raise ShapeError(f"未知的 batchnorm 模式: {mode}")

    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (xv - mean) * inv_std
    out = gv * xhat + bv

    def backward_fn(g, needs):
        gx = None
        if needs[0]:
            dxhat = g * gv
            if mode == "train":
                gx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=axes)
                                      - xhat * (dxhat * xhat).sum(axis=axes))
            else:
                gx = dxhat * inv_std
        ggamma = (g * xhat).sum(axis=axes) if needs[1] else None
        gbeta = g.sum(axis=axes) if needs[2] else None
        return gx, ggamma, gbeta

    return make_output("batchnorm", (x, gamma, beta), out, backward_fn)


# ==================== 激活 ====================

def leaky_relu(x: Tensor, slope: float) -> Tensor:
    """max(x, slope·x)，x = 0 处次梯度取 slope"""
    if not 0.0 < slope < 1.0:
        raise DomainError(f"leaky_relu 斜率必须在 (0,1) 内，实际 {slope}")
    xv = x.value
    positive = xv > 0
    out = np.where(positive, xv, slope * xv)

    def backward_fn(g, needs):
        return (np.where(positive, g, slope * g),)

    return make_output("leaky_relu", (x,), out, backward_fn)


def sigmoid(x: Tensor) -> Tensor:
    """1/(1+e^-x)，输出截断在开区间 (0,1) 内；饱和处梯度按截断后的值计算"""
    out = np.clip(expit(x.value), SIGMOID_LO, SIGMOID_HI)

    def backward_fn(g, needs):
        return (g * out * (1.0 - out),)

    return make_output("sigmoid", (x,), out, backward_fn)


def softmax_channels(x: Tensor) -> Tensor:
    """按最后一维（通道）做 softmax"""
    xv = x.value
    e = np.exp(xv - xv.max(axis=-1, keepdims=True))
    out = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g, needs):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return make_output("softmax_channels", (x,), out, backward_fn)


def log(x: Tensor) -> Tensor:
    """
    自然对数

    Raises:
        DomainError: 存在非正数（截断由调用方负责）
    """
    xv = x.value
    if np.any(xv <= 0):
        raise DomainError(f"log 输入含非正数 (最小值 {xv.min():.3g})，调用方需先截断到 [1e-7, 1-1e-7]")
    out = np.log(xv)

    def backward_fn(g, needs):
        return (g / xv,)

    return make_output("log", (x,), out, backward_fn)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """截断到 [lo, hi]；区间内梯度直通，区间外为 0"""
    xv = x.value
    inside = (xv >= lo) & (xv <= hi)
    out = np.clip(xv, lo, hi)

    def backward_fn(g, needs):
        return (np.where(inside, g, 0.0),)

    return make_output("clip", (x,), out, backward_fn)


# ==================== 全连接 / 形状 ====================

def fully_connected(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """
    仿射变换 x @ W + b

    Args:
        x: B×F
        weights: F×G
        bias: G
    """
    xv, wv, bv = x.value, weights.value, bias.value
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[0]:
        raise ShapeError(f"fully_connected 维度不匹配: 输入 {xv.shape}，权重 {wv.shape}")
    if bv.shape != (wv.shape[1],):
        raise ShapeError(f"fully_connected 偏置形状应为 ({wv.shape[1]},)，实际 {bv.shape}")
    out = xv @ wv + bv

    def backward_fn(g, needs):
        gx = g @ wv.T if needs[0] else None
        gw = xv.T @ g if needs[1] else None
        gb = g.sum(axis=0) if needs[2] else None
        return gx, gw, gb

    return make_output("fully_connected", (x, weights, bias), out, backward_fn)


def concat_channels(*tensors: Tensor) -> Tensor:
    """沿最后一维拼接，反向时按通道数拆回"""
    if not tensors:
        raise ShapeError("concat_channels 至少需要一个输入")
    base = tensors[0].shape[:-1]
    for t in tensors[1:]:
        if t.shape[:-1] != base:
            raise ShapeError(f"concat_channels 非通道维不一致: {base} vs {t.shape[:-1]}")
    widths = [t.shape[-1] for t in tensors]
    out = np.concatenate([t.value for t in tensors], axis=-1)
    cuts = np.cumsum(widths)[:-1]

    def backward_fn(g, needs):
        return tuple(np.split(g, cuts, axis=-1))

    return make_output("concat_channels", tuple(tensors), out, backward_fn)


def crop(x: Tensor, region: Tuple[int, int, int, int]) -> Tensor:
    """
    空间裁剪

    Args:
        x: B×H×W×C
        region: (top, left, height, width)
    """
    top, left, h, w = region
    _, height, width, _ = x.shape
    if top < 0 or left < 0 or h <= 0 or w <= 0 or top + h > height or left + w > width:
        raise ShapeError(f"crop 区域 {region} 超出输入 {height}×{width}")
    out = x.value[:, top:top + h, left:left + w, :]

    def backward_fn(g, needs):
        gx = np.zeros(x.shape)
        gx[:, top:top + h, left:left + w, :] = g
        return (gx,)

    return make_output("crop", (x,), out, backward_fn)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    src = x.shape
    out = x.value.reshape(shape)

    def backward_fn(g, needs):
        return (g.reshape(src),)

    return make_output("reshape", (x,), out, backward_fn)


def flatten(x: Tensor) -> Tensor:
    """B×... -> B×F"""
    return reshape(x, (x.shape[0], -1))


# ==================== 归约 / 算术 ====================

def mean(x: Tensor) -> Tensor:
    """所有元素的均值，输出标量"""
    size = x.size
    out = np.asarray(x.value.mean())

    def backward_fn(g, needs):
        return (np.full(x.shape, float(g) / size),)

    return make_output("mean", (x,), out, backward_fn)


def sum_channels(x: Tensor) -> Tensor:
    """沿最后一维求和，保留维度"""
    out = x.value.sum(axis=-1, keepdims=True)

    def backward_fn(g, needs):
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_output("sum_channels", (x,), out, backward_fn)


def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        c = float(b)

        def backward_scalar(g, needs):
            return (g,)

        return make_output("add_scalar", (a,), a.value + c, backward_scalar)
    _check_same(a, b, "add")

    def backward_fn(g, needs):
        return g, g

    return make_output("add", (a, b), a.value + b.value, backward_fn)


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def sub(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -float(b))
    return add(a, neg(b))


def scale(a: Tensor, c: Scalar) -> Tensor:
    c = float(c)

    def backward_fn(g, needs):
        return (g * c,)

    return make_output("scale", (a,), a.value * c, backward_fn)


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    """逐元素乘（同形状或标量）"""
    if not isinstance(b, Tensor):
        return scale(a, b)
    _check_same(a, b, "mul")
    av, bv = a.value, b.value

    def backward_fn(g, needs):
        return (g * bv if needs[0] else None), (g * av if needs[1] else None)

    return make_output("mul", (a, b), av * bv, backward_fn)


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} 需要相同形状: {a.shape} vs {b.shape}")
