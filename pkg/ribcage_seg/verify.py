#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
梯度检查套件

逐个可微操作做逐元素中心差分检查（误差 < 1e-5），
估计网络和判别网络在 16×16 输入上做整网方向导数检查（误差 < 1e-4）。
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ribcage_seg.errors import ConfigError
from ribcage_seg.log import get_logger
from ribcage_seg.networks import (
    Binder,
    DiscriminatorConfig,
    EstimatorConfig,
    discriminator_forward,
    estimator_forward,
    init_params,
)
from ribcage_seg.tensor import ops
from ribcage_seg.tensor.core import Tensor, constant, record
from ribcage_seg.tensor.gradcheck import directional_check, grad_check

logger = get_logger(__name__)

OP_TOLERANCE = 1e-5
NETWORK_TOLERANCE = 1e-4
CASE_SIZE = 16
FAULT_FACTOR = 1.1


@dataclass
class GradCase:
    """一项梯度检查"""
    name: str
    fn: Callable[..., Tensor]
    inputs: List[np.ndarray]
    tolerance: float = OP_TOLERANCE
    directional: bool = False


@dataclass
class GradCaseResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.error < self.tolerance

    def to_dict(self) -> dict:
        return {"op": self.name, "max_rel_error": self.error, "tolerance": self.tolerance, "passed": self.passed}


def _weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    """Σ out·w，把任意形状的输出折成标量"""
    return ops.scale(ops.mean(ops.mul(out, constant(weights))), out.size)


class _CaseBinder(Binder):
    """把网络参数替换为 grad_check 传进来的张量"""

    def __init__(self, substitutes: Dict[int, Tensor]):
        super().__init__(None)
        self.substitutes = substitutes

    def __call__(self, array: np.ndarray) -> Tensor:
        sub = self.substitutes.get(id(array))
        return sub if sub is not None else constant(array)


def _op_cases(rng: np.random.Generator) -> List[GradCase]:
    n = rng.standard_normal
    cases = []

    def add_case(name, fn, inputs, out_shape):
        w = n(out_shape)
        cases.append(GradCase(name, lambda *t, fn=fn, w=w: _weighted(fn(*t), w), inputs))

    add_case("conv2d", lambda x, k, b: ops.conv2d(x, k, b, stride=1),
              [n((2, 8, 8, 2)), n((3, 3, 2, 4)), n(4)], (2, 8, 8, 4))
    add_case("conv2d_stride2", lambda x, k, b: ops.conv2d(x, k, b, stride=2),
              [n((2, 7, 7, 2)), n((4, 4, 2, 3)), n(3)], (2, 4, 4, 3))
    add_case("batchnorm", lambda x, g, b: ops.batchnorm(x, g, b, None, "train"),
              [n((4, 4, 4, 2)), 1.0 + 0.1 * n(2), n(2)], (4, 4, 4, 2))
    stats = ops.BatchNormState(n(2), 0.5 + rng.random(2), 1)
    add_case("batchnorm_infer", lambda x, g, b: ops.batchnorm(x, g, b, stats, "infer"),
              [n((2, 3, 3, 2)), 1.0 + 0.1 * n(2), n(2)], (2, 3, 3, 2))
    add_case("leaky_relu", lambda x: ops.leaky_relu(x, 0.2), [n((3, 5, 5, 2))], (3, 5, 5, 2))
    add_case("sigmoid", ops.sigmoid, [n((4, 3))], (4, 3))
    add_case("softmax_channels", ops.softmax_channels, [n((2, 4, 4, 3))], (2, 4, 4, 3))
    add_case("log", ops.log, [0.5 + rng.random((3, 4))], (3, 4))
    add_case("clip", lambda x: ops.clip(x, -0.5, 0.5), [n((4, 5))], (4, 5))
    add_case("fully_connected", ops.fully_connected, [n((3, 5)), n((5, 4)), n(4)], (3, 4))
    add_case("concat_channels", lambda a, b: ops.concat_channels(a, b),
              [n((2, 3, 3, 3)), n((2, 3, 3, 1))], (2, 3, 3, 4))
    add_case("crop", lambda x: ops.crop(x, (1, 2, 3, 3)), [n((2, 6, 6, 2))], (2, 3, 3, 2))
    add_case("reshape", lambda x: ops.reshape(x, (2, 12)), [n((2, 2, 3, 2))], (2, 12))
    add_case("flatten", ops.flatten, [n((2, 3, 3, 2))], (2, 18))
    add_case("mean", ops.mean, [n((3, 4))], ())
    add_case("sum_channels", ops.sum_channels, [n((2, 3, 3, 4))], (2, 3, 3, 1))
    add_case("add", ops.add, [n((3, 4)), n((3, 4))], (3, 4))
    add_case("sub", ops.sub, [n((3, 4)), n((3, 4))], (3, 4))
    add_case("mul", ops.mul, [n((3, 4)), n((3, 4))], (3, 4))
    add_case("neg", ops.neg, [n((3, 4))], (3, 4))
    add_case("scale", lambda x: ops.scale(x, 2.5), [n((3, 4))], (3, 4))
    return cases


def _network_cases(rng: np.random.Generator, seed: int) -> List[GradCase]:
    cases = []

    estimator = init_params(seed, EstimatorConfig())
    e_named = list(estimator.named_parameters().values())
    e_weights = rng.standard_normal((2, CASE_SIZE, CASE_SIZE, 3))

    def estimator_fn(image, *params):
        bind = _CaseBinder({id(a): t for a, t in zip(e_named, params)})
        return _weighted(estimator_forward(estimator, image, "train", bind, track_stats=False), e_weights)

    cases.append(GradCase("estimator", estimator_fn,
                        [rng.standard_normal((2, CASE_SIZE, CASE_SIZE, 1))] + [a.copy() for a in e_named],
                        NETWORK_TOLERANCE, directional=True))

    discriminator = init_params(seed + 1, DiscriminatorConfig(input_size=CASE_SIZE))
    d_named = list(discriminator.named_parameters().values())
    d_weights = rng.standard_normal((4, 1))
    logits = rng.standard_normal((4, CASE_SIZE, CASE_SIZE, 3))
    seg = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)

    def discriminator_fn(image, seg_map, *params):
        bind = _CaseBinder({id(a): t for a, t in zip(d_named, params)})
        out = discriminator_forward(discriminator, image, seg_map, "train", bind, track_stats=False)
        return _weighted(out, d_weights)

    cases.append(GradCase("discriminator", discriminator_fn,
                        [rng.standard_normal((4, CASE_SIZE, CASE_SIZE, 1)), seg] + [a.copy() for a in d_named],
                        NETWORK_TOLERANCE, directional=True))
    return cases


def build_cases(seed: int = 0, include_networks: bool = True) -> List[GradCase]:
    """
    构造全部检查项

    Args:
        seed: 输入与网络初始化的种子
        include_networks: 是否包含两个整网检查

    Returns:
        list[GradCase]
    """
    rng = np.random.default_rng(seed)
    cases = _op_cases(rng)
    if include_networks:
        cases.extend(_network_cases(rng, seed))
    return cases


def inject_fault(case: GradCase, factor: float = FAULT_FACTOR) -> GradCase:
    """
    在检查项输出后串一个前向恒等、反向乘 factor 的自定义操作

    Returns:
        反向被篡改的新 GradCase（用于验证套件能发现错误）
    """
    def faulty(*tensors):
        out = case.fn(*tensors)
        if out.graph is None:
            return out
        return record(out.graph, "faulty_identity", (out,), out.value, lambda g, needs: (g * factor,))

    return GradCase(f"{case.name}[fault]", faulty, case.inputs, case.tolerance, case.directional)


def run_case(case: GradCase, seed: int = 0) -> GradCaseResult:
    if case.directional:
        error = directional_check(case.fn, case.inputs, seed=seed)
    else:
        error = grad_check(case.fn, case.inputs, eps=1e-5)
    return GradCaseResult(case.name, error, case.tolerance)


def gradcheck_suite(seed: int = 0, include_networks: bool = True, fault: Optional[str] = None,
                    only: Optional[Sequence[str]] = None) -> List[GradCaseResult]:
    """
    运行梯度检查套件

    Args:
        seed: 种子
        include_networks: 是否运行整网检查
        fault: 要注入错误反向的检查项名称
        only: 只运行这些检查项

    Returns:
        list[GradCaseResult]，顺序与 build_cases() 一致

    Raises:
        ConfigError: fault / only 中有未知的检查项
    """
    cases = build_cases(seed, include_networks)
    names = [p.name for p in cases]
    for name in ([fault] if fault else []) + list(only or []):
        if name not in names:
            raise ConfigError(f"未知的梯度检查项: {name}（可选: {', '.join(names)}）")
    if only:
        cases = [p for p in cases if p.name in only]
    if fault:
        cases = [inject_fault(p) if p.name == fault else p for p in cases]

    results = []
    for case in cases:
        result = run_case(case, seed)
        status = "✅" if result.passed else "❌"
        logger.info(f"{status} {result.name:<20} max rel err {result.error:.3e} (< {result.tolerance:.0e})")
        results.append(result)
    return results
