#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
对抗损失

L_D = E[log D(I, Γ_M) + log(1 - D(I, E(I)))]   判别网络最大化
L_E = E[log D(I, E(I))]                        估计网络最大化（非饱和形式）
优化器最小化它们的相反数。
"""
import numpy as np

from ribcage_seg.errors import DomainError, ShapeError
from ribcage_seg.tensor.core import Tensor, constant
from ribcage_seg.tensor.ops import clip, log, mean, mul, neg, sum_channels

LOG_EPS = 1e-7


def clamp_probability(p: Tensor) -> Tensor:
    """截断到 [1e-7, 1 - 1e-7]，避免 log(0)"""
    return clip(p, LOG_EPS, 1.0 - LOG_EPS)


def _check_probability(t: Tensor, name: str) -> None:
    v = t.value
    if np.any(v < LOG_EPS) or np.any(v > 1.0 - LOG_EPS):
        raise DomainError(
            f"{name} 超出 [{LOG_EPS}, 1-{LOG_EPS}]（min={v.min():.3g}, max={v.max():.3g}），请先 clamp_probability"
        )


def loss_discriminator(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """
    判别网络目标 mean[log d_real + log(1 - d_fake)]

    Args:
        d_real: D(I, Γ_M)，B×1，已截断
        d_fake: D(I, Γ̂)，B×1，已截断

    Returns:
        标量 Tensor（判别网络要最大化它）

    Raises:
        DomainError: 输入未截断到合法区间
    """
    if d_real.shape != d_fake.shape:
        raise ShapeError(f"d_real {d_real.shape} 与 d_fake {d_fake.shape} 形状不一致")
    _check_probability(d_real, "d_real")
    _check_probability(d_fake, "d_fake")
    return mean(log(d_real) + log(1.0 - d_fake))


def loss_estimator(d_fake: Tensor) -> Tensor:
    """
    估计网络目标 mean[log d_fake]，最优值 0（判别网络完全被骗过）

    Raises:
        DomainError: 输入未截断到合法区间
    """
    _check_probability(d_fake, "d_fake")
    return mean(log(d_fake))


def loss_cross_entropy(probs: Tensor, one_hot: np.ndarray) -> Tensor:
    """
    逐像素交叉熵 mean[-Σ_c y_c log p_c]（只训练估计网络的对照模式）

    Args:
        probs: 估计网络输出 B×H×W×3
        one_hot: 目标 B×H×W×3

    Returns:
        标量 Tensor（最小化）
    """
    if probs.shape != np.shape(one_hot):
        raise ShapeError(f"概率图 {probs.shape} 与目标 {np.shape(one_hot)} 形状不一致")
    log_p = log(clamp_probability(probs))
    return neg(mean(sum_channels(mul(log_p, constant(one_hot)))))
