#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Adam 优化器（带偏差修正）
"""
from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from ribcage_seg.errors import ShapeError


@dataclass
class AdamState:
    """一阶/二阶矩缓存，随检查点保存"""
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def fresh(cls, named: Dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(a) for k, a in named.items()},
            v={k: np.zeros_like(a) for k, a in named.items()},
        )


def adam_update(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], moments: AdamState,
                lr: float, beta1: float, beta2: float, eps: float, step: int
                ) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    原地执行一步 Adam

    m = β1·m + (1-β1)·g
    v = β2·v + (1-β2)·g²
    p -= lr · m̂ / (sqrt(v̂) + ε)，m̂ = m / (1-β1^t)，v̂ = v / (1-β2^t)

    Args:
        params: 参数名 -> 数组（原地更新）
        grads: 参数名 -> 梯度；缺失的参数按零梯度处理
        moments: 矩缓存（原地更新）
        lr, beta1, beta2, eps: 超参数
        step: 当前步数 t（从 1 开始）

    Returns:
        (params, moments)
    """
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        elif g.shape != p.shape:
            raise ShapeError(f"参数 {name} 形状 {p.shape} 与梯度形状 {g.shape} 不一致")
        if name not in moments.m:
            moments.m[name] = np.zeros_like(p)
            moments.v[name] = np.zeros_like(p)
        m = moments.m[name]
        v = moments.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    moments.step = step
    return params, moments
