#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
异常定义

命令行按异常类型映射退出码:
    GradcheckFailed                    -> 1
    ConfigError / 其他 RibcageSegError -> 2
    TrainingDiverged / NonFiniteError  -> 3
"""


class RibcageSegError(Exception):
    """所有业务异常的基类"""


class ShapeError(RibcageSegError, ValueError):
    """张量形状不匹配"""


class NonFiniteError(RibcageSegError, FloatingPointError):
    """前向结果出现 NaN / Inf"""


class GraphError(RibcageSegError):
    """计算图使用错误（非标量 loss、混用两张图等）"""


class ConfigError(RibcageSegError, ValueError):
    """配置无效或包含未知键"""


class DataError(RibcageSegError):
    """数据读写 / 生成错误"""


class SynthesisError(DataError):
    """合成样本时无法放置足够的细胞"""


class LabelCodecError(DataError, ValueError):
    """RGB 标签编码/解码失败"""


class ImageFormatError(DataError):
    """图像文件无法读取或通道数不对"""


class CheckpointError(RibcageSegError):
    """检查点损坏、缺失或版本不匹配"""


class EvaluationError(RibcageSegError, ValueError):
    """评估输入无效"""


class TrainingDiverged(RibcageSegError):
    """训练过程中 loss 出现 NaN，附带出错的 step"""

    def __init__(self, message: str, step: int, dump_path=None):
        super().__init__(message)
        self.step = step
        self.dump_path = dump_path


class GradcheckFailed(RibcageSegError):
    """梯度检查未通过"""


class DomainError(RibcageSegError, ValueError):
    """输入超出操作的定义域（如 log 非正数、概率越界）"""


class MissingStatisticsError(RibcageSegError):
    """推理模式下批归一化还没有运行统计量"""
