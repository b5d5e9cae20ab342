#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
有限差分梯度检查
"""
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ribcage_seg.errors import GraphError
from ribcage_seg.tensor.core import Graph, Tensor, backward, constant

REL_FLOOR = 1e-8


def relative_error(analytic: float, numeric: float) -> float:
    """|a - n| / max(|a|, |n|, 1e-8)"""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)


def grad_check(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], eps: float = 1e-5,
               wrt: Optional[Iterable[int]] = None, sample: Optional[int] = None,
               seed: int = 0) -> float:
    """
    用中心差分 (f(x+ε) - f(x-ε)) / 2ε 对比反向传播的梯度

    Args:
        fn: 闭包，接收与 inputs 一一对应的 Tensor，返回标量 Tensor；必须是确定性的
        inputs: 输入数组
        eps: 差分步长
        wrt: 需要检查的输入下标，默认全部
        sample: 每个输入最多抽查的元素个数（固定种子抽样），默认逐元素全查
        seed: 抽样种子

    Returns:
        float: 最大相对误差
    """
    arrays = [np.array(a, dtype=np.float64) for a in inputs]
    wrt = sorted(set(range(len(arrays)) if wrt is None else wrt))

    graph = Graph()
    tensors = [graph.leaf(a) if i in wrt else constant(a) for i, a in enumerate(arrays)]
    loss = fn(*tensors)
    if loss.graph is not graph:
        raise GraphError("grad_check 的闭包没有用到被检查的输入")
    grads = backward(graph, loss)

    def evaluate() -> float:
        return fn(*[constant(a) for a in arrays]).item()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in wrt:
        analytic = grads.get(tensors[i].node_id, np.zeros(arrays[i].shape)).reshape(-1)
        flat = arrays[i].reshape(-1)
        indices = np.arange(flat.size)
        if sample is not None and flat.size > sample:
            indices = np.sort(rng.choice(flat.size, size=sample, replace=False))
        for k in indices:
            original = flat[k]
            flat[k] = original + eps
            f_plus = evaluate()
            flat[k] = original - eps
            f_minus = evaluate()
            flat[k] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            worst = max(worst, relative_error(float(analytic[k]), numeric))
    return worst


def directional_check(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], eps: float = 1e-8,
                      wrt: Optional[Iterable[int]] = None, directions: int = 3, seed: int = 0) -> float:
    """
    沿随机方向 v 比较 ∇f·v 与 (f(x+εv) - f(x-εv)) / 2ε

    用于整网检查：一次反向 + 2 × directions 次前向

    Args:
        fn: 同 grad_check
        inputs: 输入数组
        eps: 差分步长
        wrt: 参与扰动的输入下标，默认全部
        directions: 随机方向个数
        seed: 方向采样种子

    Returns:
        float: 各方向中的最大相对误差
    """
    arrays = [np.array(a, dtype=np.float64) for a in inputs]
    wrt = sorted(set(range(len(arrays)) if wrt is None else wrt))

    graph = Graph()
    tensors = [graph.leaf(a) if i in wrt else constant(a) for i, a in enumerate(arrays)]
    loss = fn(*tensors)
    if loss.graph is not graph:
        raise GraphError("directional_check 的闭包没有用到被检查的输入")
    grads = backward(graph, loss)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(directions):
        vs = {i: rng.standard_normal(arrays[i].shape) for i in wrt}
        analytic = sum(float(np.sum(grads[tensors[i].node_id] * v))
                       for i, v in vs.items() if tensors[i].node_id in grads)
        plus = fn(*[constant(a + eps * vs[i]) if i in vs else constant(a) for i, a in enumerate(arrays)]).item()
        minus = fn(*[constant(a - eps * vs[i]) if i in vs else constant(a) for i, a in enumerate(arrays)]).item()
        worst = max(worst, relative_error(analytic, (plus - minus) / (2.0 * eps)))
    return worst
