#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
网络参数结构与初始化

θ_E（估计网络）和 θ_D（Rib Cage 判别网络）都是 numpy 数组组成的 dataclass，
named_parameters() 给出扁平的 名称 -> 数组（引用），供 Adam 和检查点使用。
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ribcage_seg.errors import ConfigError
from ribcage_seg.tensor.core import Graph, Tensor, constant
from ribcage_seg.tensor.ops import BatchNormState

LEAKY_SLOPE = 0.2


# ==================== 配置 ====================

@dataclass
class EstimatorConfig:
    """估计网络结构: (卷积核大小, 输出通道) × 5，最后一层无 BN"""
    layers: Tuple[Tuple[int, int], ...] = ((9, 16), (7, 32), (5, 64), (4, 64), (1, 3))
    in_channels: int = 1
    slope: float = LEAKY_SLOPE


@dataclass
class DiscriminatorConfig:
    """
    Rib Cage 判别网络结构

    spine: 三个 block 的 Spine 卷积 (核大小, 通道)，Rib 通道数是 Spine 的 2 倍
    fusion: 第三个 block 之后的融合卷积
    fc: 全连接层输出维度，最后一层为 1 + sigmoid
    input_size: 期望的输入边长（16 的倍数）
    """
    spine: Tuple[Tuple[int, int], ...] = ((9, 8), (5, 32), (3, 64))
    fusion: Tuple[int, int] = (4, 64)
    fc: Tuple[int, ...] = (64, 64, 1)
    image_channels: int = 1
    seg_channels: int = 3
    input_size: int = 64
    slope: float = LEAKY_SLOPE

    def validate(self) -> None:
        if self.input_size < 16 or self.input_size % 16 != 0:
            raise ConfigError(f"判别网络 input_size 必须是 16 的正整数倍，实际 {self.input_size}")
        if len(self.spine) != 3:
            raise ConfigError(f"判别网络需要 3 个 Rib Cage block，实际 {len(self.spine)}")

    @property
    def flat_features(self) -> int:
        """4 次步长 2 之后展平的长度"""
        side = self.input_size // 16
        return side * side * self.fusion[1]


# ==================== 参数结构 ====================

@dataclass
class ConvParams:
    kernel: np.ndarray
    bias: np.ndarray


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    state: BatchNormState


@dataclass
class ConvBlockParams:
    """conv -> batchnorm -> leaky-ReLU"""
    conv: ConvParams
    bn: BatchNormParams


@dataclass
class DenseParams:
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class EstimatorParams:
    """θ_E"""
    config: EstimatorConfig
    layers: List[ConvBlockParams] = field(default_factory=list)
    head: Optional[ConvParams] = None

    def named_parameters(self) -> Dict[str, np.ndarray]:
        named = {}
        for i, layer in enumerate(self.layers, 1):
            named.update(_conv_block_named(layer, f"layer{i}"))
        named["head.conv.kernel"] = self.head.kernel
        named["head.conv.bias"] = self.head.bias
        return named

    def named_buffers(self) -> Dict[str, BatchNormState]:
        return {f"layer{i}.bn": layer.bn.state for i, layer in enumerate(self.layers, 1)}

    def parameter_count(self) -> int:
        return sum(a.size for a in self.named_parameters().values())


@dataclass
class RibCageBlockParams:
    """一个 Rib Cage block：两条 Rib（GL / 分割）+ 一条 Spine，Rib 不共享权重"""
    gl_rib: ConvBlockParams
    seg_rib: ConvBlockParams
    spine: ConvBlockParams

    def named_parameters(self, prefix: str) -> Dict[str, np.ndarray]:
        named = {}
        for part in ("gl_rib", "seg_rib", "spine"):
            named.update(_conv_block_named(getattr(self, part), f"{prefix}.{part}"))
        return named


@dataclass
class DiscriminatorParams:
    """θ_D"""
    config: DiscriminatorConfig
    blocks: List[RibCageBlockParams] = field(default_factory=list)
    fusion: Optional[ConvBlockParams] = None
    fc: List[DenseParams] = field(default_factory=list)

    def named_parameters(self) -> Dict[str, np.ndarray]:
        named = {}
        for i, block in enumerate(self.blocks, 1):
            named.update(block.named_parameters(f"block{i}"))
        named.update(_conv_block_named(self.fusion, "fusion"))
        for i, dense in enumerate(self.fc, 1):
            named[f"fc{i}.weights"] = dense.weights
            named[f"fc{i}.bias"] = dense.bias
        return named

    def named_buffers(self) -> Dict[str, BatchNormState]:
        buffers = {}
        for i, block in enumerate(self.blocks, 1):
            for part in ("gl_rib", "seg_rib", "spine"):
                buffers[f"block{i}.{part}.bn"] = getattr(block, part).bn.state
        buffers["fusion.bn"] = self.fusion.bn.state
        return buffers

    def parameter_count(self) -> int:
        return sum(a.size for a in self.named_parameters().values())


def _conv_block_named(block: ConvBlockParams, prefix: str) -> Dict[str, np.ndarray]:
    return {
        f"{prefix}.conv.kernel": block.conv.kernel,
        f"{prefix}.conv.bias": block.conv.bias,
        f"{prefix}.bn.gamma": block.bn.gamma,
        f"{prefix}.bn.beta": block.bn.beta,
    }


# ==================== 绑定到计算图 ====================

class Binder:
    """
    把参数数组绑定为计算图叶子

    同一个数组只登记一次；graph 为 None 时全部返回常量（推理 / 冻结的一方）。
    """

    def __init__(self, graph: Optional[Graph] = None):
        self.graph = graph
        self._leaves: Dict[int, Tuple[np.ndarray, Tensor]] = {}

    def __call__(self, array: np.ndarray) -> Tensor:
        if self.graph is None:
            return constant(array)
        key = id(array)
        if key not in self._leaves:
            self._leaves[key] = (array, self.graph.leaf(array))
        return self._leaves[key][1]

    def gradients(self, grads: Dict[int, np.ndarray], named: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """
        按参数名取出梯度

        Args:
            grads: backward() 的结果
            named: named_parameters()

        Returns:
            dict: 参数名 -> 梯度（不可达的参数不出现）
        """
        out = {}
        for name, array in named.items():
            entry = self._leaves.get(id(array))
            if entry is not None and entry[1].node_id in grads:
                out[name] = grads[entry[1].node_id]
        return out


# ==================== 初始化 ====================

def _he_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _conv_block(rng: np.random.Generator, k: int, cin: int, cout: int) -> ConvBlockParams:
    conv = ConvParams(_he_normal(rng, (k, k, cin, cout), k * k * cin), np.zeros(cout))
    bn = BatchNormParams(np.ones(cout), np.zeros(cout), BatchNormState.fresh(cout))
    return ConvBlockParams(conv, bn)


def init_params(seed: int, config: Union[EstimatorConfig, DiscriminatorConfig]
                ) -> Union[EstimatorParams, DiscriminatorParams]:
    """
    He 初始化（std = sqrt(2 / fan_in)），偏置 0，gamma 1，beta 0；完全由种子决定

    Args:
        seed: 随机种子
        config: EstimatorConfig 或 DiscriminatorConfig

    Returns:
        对应的参数结构
    """
    rng = np.random.default_rng(seed)

    if isinstance(config, EstimatorConfig):
        params = EstimatorParams(config=config)
        cin = config.in_channels
        for k, cout in config.layers[:-1]:
            params.layers.append(_conv_block(rng, k, cin, cout))
            cin = cout
        k, cout = config.layers[-1]
        params.head = ConvParams(_he_normal(rng, (k, k, cin, cout), k * k * cin), np.zeros(cout))
        return params

    if isinstance(config, DiscriminatorConfig):
        config.validate()
        params = DiscriminatorParams(config=config)
        gl_c, seg_c, spine_c = config.image_channels, config.seg_channels, 0
        for k, spine_out in config.spine:
            rib_out = 2 * spine_out
            block = RibCageBlockParams(
                gl_rib=_conv_block(rng, k, gl_c, rib_out),
                seg_rib=_conv_block(rng, k, seg_c, rib_out),
                spine=_conv_block(rng, k, gl_c + seg_c + spine_c, spine_out),
            )
            params.blocks.append(block)
            gl_c, seg_c, spine_c = rib_out, rib_out, spine_out
        k, fusion_out = config.fusion
        params.fusion = _conv_block(rng, k, gl_c + seg_c + spine_c, fusion_out)
        features = config.flat_features
        for width in config.fc:
            params.fc.append(DenseParams(_he_normal(rng, (features, width), features), np.zeros(width)))
            features = width
        return params

    raise ConfigError(f"未知的网络配置类型: {type(config).__name__}")
