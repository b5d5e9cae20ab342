#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
张量与计算图

Tensor 只保存前向值（float64，只读）和所在计算图中的节点号。
Graph 按创建顺序记录节点，因此节点列表天然是拓扑序；
backward() 只沿着从 loss 可达的节点反向累加梯度。
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ribcage_seg.errors import GraphError, NonFiniteError

# backward_fn(上游梯度, 各输入是否需要梯度) -> 各输入的梯度（不需要的位置返回 None）
BackwardFn = Callable[[np.ndarray, Tuple[bool, ...]], Tuple[Optional[np.ndarray], ...]]


@dataclass
class Node:
    """计算图节点"""
    op: str                                  # 操作类型，如 "conv2d"
    inputs: Tuple[Optional[int], ...]        # 输入节点号，常量输入为 None
    shape: Tuple[int, ...]                   # 输出形状
    backward_fn: Optional[BackwardFn] = None  # 叶子节点为 None
    name: Optional[str] = None


@dataclass
class Graph:
    """一次前向传播的计算图（单线程构建）"""
    nodes: List[Node] = field(default_factory=list)

    def leaf(self, value, name: Optional[str] = None) -> "Tensor":
        """登记一个需要梯度的叶子（通常是网络参数或被检查的输入）"""
        value = _as_f64(value)
        node_id = len(self.nodes)
        self.nodes.append(Node(op="leaf", inputs=(), shape=value.shape, name=name))
        return Tensor(value, graph=self, node_id=node_id)

    def record(self, op: str, inputs: Sequence["Tensor"], value: np.ndarray,
               backward_fn: BackwardFn) -> "Tensor":
        node_id = len(self.nodes)
        ids = tuple(t.node_id if t.graph is self else None for t in inputs)
        self.nodes.append(Node(op=op, inputs=ids, shape=value.shape, backward_fn=backward_fn))
        return Tensor(value, graph=self, node_id=node_id)

    def backward(self, loss: "Tensor") -> Dict[int, np.ndarray]:
        return backward(self, loss)


class Tensor:
    """
    稠密 N 维张量

    图像类数据的布局为 batch × height × width × channels，
    扁平数据为 batch × features。没有 graph 的张量是常量。
    """
    __slots__ = ("value", "graph", "node_id")

    def __init__(self, value, graph: Optional[Graph] = None, node_id: Optional[int] = None):
        self.value = _as_f64(value)
        self.graph = graph
        self.node_id = node_id

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        if self.value.size != 1:
            raise GraphError(f"item() 需要单元素张量，实际形状 {self.shape}")
        return float(self.value.reshape(-1)[0])

    def __repr__(self):
        tag = f"node={self.node_id}" if self.graph is not None else "const"
        return f"Tensor(shape={self.shape}, {tag})"

    # 运算符只是 ops 中函数的快捷方式
    def __add__(self, other):
        from ribcage_seg.tensor import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from ribcage_seg.tensor import ops
        return ops.add(self, other)

    def __sub__(self, other):
        from ribcage_seg.tensor import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from ribcage_seg.tensor import ops
        return ops.add(ops.neg(self), other)

    def __mul__(self, other):
        from ribcage_seg.tensor import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from ribcage_seg.tensor import ops
        return ops.mul(self, other)

    def __neg__(self):
        from ribcage_seg.tensor import ops
        return ops.neg(self)


def _as_f64(value) -> np.ndarray:
    # 只读视图，不拷贝数据
    arr = np.asarray(value, dtype=np.float64).view()
    arr.flags.writeable = False
    return arr


def constant(value) -> Tensor:
    """不参与求导的常量张量"""
    return Tensor(value)


def active_graph(inputs: Sequence[Tensor]) -> Optional[Graph]:
    """
    找出输入所在的计算图

    Raises:
        GraphError: 输入来自两张不同的图
    """
    graph = None
    for t in inputs:
        if t.graph is None:
            continue
        if graph is None:
            graph = t.graph
        elif t.graph is not graph:
            raise GraphError("同一个操作的输入来自两张不同的计算图")
    return graph


def make_output(op: str, inputs: Sequence[Tensor], value: np.ndarray,
                backward_fn: BackwardFn) -> Tensor:
    """
    封装一次前向结果：检查有限性，有图则登记节点

    Raises:
        NonFiniteError: 前向结果出现 NaN/Inf
    """
    if not np.all(np.isfinite(value)):
        bad = int(np.size(value) - np.count_nonzero(np.isfinite(value)))
        raise NonFiniteError(f"{op} 前向结果含 {bad} 个非有限值 (NaN/Inf)")
    graph = active_graph(inputs)
    if graph is None:
        return Tensor(value)
    return graph.record(op, inputs, value, backward_fn)


def record(graph: Graph, op: str, inputs: Sequence[Tensor], value: np.ndarray,
           backward_fn: BackwardFn) -> Tensor:
    """
    登记自定义操作（公开钩子）

    Args:
        graph: 目标计算图
        op: 操作名
        inputs: 输入张量
        value: 前向结果
        backward_fn: 反向函数

    Returns:
        Tensor: 输出张量
    """
    owner = active_graph(inputs)
    if owner is not None and owner is not graph:
        raise GraphError("输入不属于目标计算图")
    return graph.record(op, inputs, np.asarray(value, dtype=np.float64), backward_fn)


def backward(graph: Graph, loss: Tensor) -> Dict[int, np.ndarray]:
    """
    反向传播

    Args:
        graph: 计算图
        loss: 标量 loss

    Returns:
        dict: 节点号 -> 梯度；从 loss 不可达的节点不出现在结果里

    Raises:
        GraphError: loss 不是标量或不属于该图
    """
    if loss.graph is not graph or loss.node_id is None:
        raise GraphError("loss 不属于该计算图")
    if loss.size != 1:
        raise GraphError(f"loss 必须是标量，实际形状 {loss.shape}")

    nodes = graph.nodes
    # 从 loss 出发的可达集合
    reachable = set()
    stack = [loss.node_id]
    while stack:
        nid = stack.pop()
        if nid in reachable:
            continue
        reachable.add(nid)
        stack.extend(i for i in nodes[nid].inputs if i is not None)

    grads: Dict[int, np.ndarray] = {loss.node_id: np.ones(nodes[loss.node_id].shape)}
    for nid in range(loss.node_id, -1, -1):
        if nid not in reachable or nid not in grads:
            continue
        node = nodes[nid]
        if node.backward_fn is None:
            continue
        needs = tuple(i is not None and i in reachable for i in node.inputs)
        if not any(needs):
            continue
        in_grads = node.backward_fn(grads[nid], needs)
        for input_id, need, g in zip(node.inputs, needs, in_grads):
            if not need or g is None:
                continue
            if input_id in grads:
                grads[input_id] = grads[input_id] + g
            else:
                grads[input_id] = np.array(g, dtype=np.float64)
    return grads
