"""张量核心 - 计算图、层原语与梯度检查"""
from ribcage_seg.tensor.core import Graph, Tensor, backward, constant, record
from ribcage_seg.tensor.ops import (
    BatchNormState,
    add,
    batchnorm,
    clip,
    concat_channels,
    conv2d,
    crop,
    flatten,
    fully_connected,
    leaky_relu,
    log,
    mean,
    mul,
    neg,
    reshape,
    scale,
    sigmoid,
    softmax_channels,
    sub,
    sum_channels,
)
from ribcage_seg.tensor.gradcheck import directional_check, grad_check, relative_error

__all__ = [
    "Graph", "Tensor", "backward", "constant", "record",
    "BatchNormState", "add", "batchnorm", "clip", "concat_channels", "conv2d", "crop",
    "flatten", "fully_connected", "leaky_relu", "log", "mean", "mul", "neg", "reshape",
    "scale", "sigmoid", "softmax_channels", "sub", "sum_channels",
    "directional_check", "grad_check", "relative_error",
]
