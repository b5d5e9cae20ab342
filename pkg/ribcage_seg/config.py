#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令配置

YAML 配置文件每个命令一节（synth / train / segment / evaluate / gradcheck / report / sweep），
节内为扁平的 key: value，映射到对应的 dataclass；
命令行 --key value 覆盖文件中的值，并按字段类型转换。未知的节或键直接报错。
"""
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, Union

import yaml

from ribcage_seg.data.synth import SynthConfig
from ribcage_seg.errors import ConfigError
from ribcage_seg.trainer.loop import TrainConfig


@dataclass
class SynthRunConfig(SynthConfig):
    output_dir: str = "data/train"
    count: int = 10
    seed: int = 0
    manifest_name: str = "manifest.txt"

    def validate(self) -> None:
        super().validate()
        if self.count < 0:
            raise ConfigError(f"synth.count 不能为负，实际 {self.count}")

    def synth_config(self) -> SynthConfig:
        return _narrow(self, SynthConfig)


@dataclass
class TrainRunConfig(TrainConfig):
    manifest: str = ""
    output_dir: str = "runs/train"
    resume: str = ""                 # 检查点路径，非空时从它继续训练
    progress: bool = True

    def validate(self) -> None:
        super().validate()
        _require(self.manifest, "train.manifest")

    def train_config(self) -> TrainConfig:
        return _narrow(self, TrainConfig)


@dataclass
class SegmentConfig:
    checkpoint: str = ""
    input: str = ""                  # 单张 PNG、PNG 目录或清单文件
    output_dir: str = "runs/segment"
    save_probabilities: bool = False

    def validate(self) -> None:
        _require(self.checkpoint, "segment.checkpoint")
        _require(self.input, "segment.input")


@dataclass
class EvaluateConfig:
    pred_dir: str = ""
    gt_dir: str = ""
    output_dir: str = "runs/evaluate"
    touching_gap: int = 5

    def validate(self) -> None:
        _require(self.pred_dir, "evaluate.pred_dir")
        _require(self.gt_dir, "evaluate.gt_dir")
        if self.touching_gap < 0:
            raise ConfigError(f"evaluate.touching_gap 不能为负，实际 {self.touching_gap}")


@dataclass
class GradcheckConfig:
    seed: int = 0
    include_networks: bool = True
    fault: str = ""                  # 注入错误反向的检查项名称（自检用）
    only: List[str] = field(default_factory=list)
    output: str = ""                 # 非空时把结果写成 CSV

    def validate(self) -> None:
        pass


@dataclass
class ReportConfig:
    loss_csv: str = ""
    metrics_csv: str = ""
    output_dir: str = "runs/report"

    def validate(self) -> None:
        if not self.loss_csv and not self.metrics_csv:
            raise ConfigError("report 至少需要 loss_csv 或 metrics_csv 之一")


@dataclass
class SweepConfig(TrainConfig):
    train_manifest: str = ""
    val_manifest: str = ""
    n_train_values: List[int] = field(default_factory=lambda: [1, 2, 4])
    include_cross_entropy: bool = True
    output_dir: str = "runs/sweep"
    progress: bool = False

    def validate(self) -> None:
        super().validate()
        _require(self.train_manifest, "sweep.train_manifest")
        _require(self.val_manifest, "sweep.val_manifest")
        if not self.n_train_values or min(self.n_train_values) <= 0:
            raise ConfigError(f"sweep.n_train_values 必须是非空的正整数列表，实际 {self.n_train_values}")

    def train_config(self, n_train: int, mode: str) -> TrainConfig:
        cfg = _narrow(self, TrainConfig)
        cfg.n_train = n_train
        cfg.mode = mode
        return cfg


SECTIONS: Dict[str, Type] = {
    "synth": SynthRunConfig,
    "train": TrainRunConfig,
    "segment": SegmentConfig,
    "evaluate": EvaluateConfig,
    "gradcheck": GradcheckConfig,
    "report": ReportConfig,
    "sweep": SweepConfig,
}


def _require(value: str, key: str) -> None:
    if not value:
        raise ConfigError(f"缺少必填配置 {key}")


def _narrow(config, cls):
    names = {f.name for f in fields(cls)}
    return cls(**{k: v for k, v in vars(config).items() if k in names})


# ==================== 读取与转换 ====================

def load_config(path: Optional[Union[str, Path]]) -> Dict[str, dict]:
    """
    加载 YAML 配置文件

    Args:
        path: 配置文件路径，None 表示不使用配置文件

    Returns:
        dict: 节名 -> 键值

    Raises:
        ConfigError: 文件不存在、YAML 语法错误、未知的节或节不是映射
    """
    if path is None:
        return {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"配置文件不存在: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"配置文件 {path} 解析失败: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"配置文件 {path} 顶层必须是映射")
    for section, values in raw.items():
        if section not in SECTIONS:
            raise ConfigError(f"配置文件 {path} 中有未知的节 '{section}'（可选: {', '.join(SECTIONS)}）")
        if values is not None and not isinstance(values, dict):
            raise ConfigError(f"配置节 '{section}' 必须是 key: value 映射")
    return {k: (v or {}) for k, v in raw.items()}


def parse_overrides(tokens: List[str]) -> Dict[str, str]:
    """
    解析 --key value / --key=value 形式的覆盖项（key 中的 - 视同 _）

    Raises:
        ConfigError: 格式错误
    """
    out: Dict[str, str] = {}
    i = 0
    while i < len(tokens):
        token = tokens[i]
        if not token.startswith("--") or len(token) <= 2:
            raise ConfigError(f"无法解析的参数 '{token}'，应为 --key value")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"参数 --{key} 缺少取值")
            value = tokens[i + 1]
            i += 2
        out[key.replace("-", "_")] = value
    return out


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def coerce(value: Any, kind, key: str) -> Any:
    """
    把配置值转换为字段类型

    Raises:
        ConfigError: 无法转换
    """
    origin = typing.get_origin(kind)
    try:
        if origin in (list, List):
            (item,) = typing.get_args(kind)
            if isinstance(value, str):
                value = [v for v in (s.strip() for s in value.split(",")) if v]
            if not isinstance(value, (list, tuple)):
                raise TypeError("应为列表")
            return [coerce(v, item, key) for v in value]
        if kind is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError("应为 true/false")
        if kind is int:
            if isinstance(value, bool):
                raise TypeError("应为整数")
            if isinstance(value, float):
                if not value.is_integer():
                    raise ValueError("应为整数")
                return int(value)
            return int(str(value).strip())
        if kind is float:
            if isinstance(value, bool):
                raise TypeError("应为数值")
            return float(value)
        if kind is str:
            return "" if value is None else str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"配置 {key}={value!r} 类型错误: {e}") from e
    raise ConfigError(f"配置 {key} 的字段类型 {kind} 不受支持")


def build_config(command: str, section: Optional[dict] = None, overrides: Optional[Dict[str, Any]] = None):
    """
    按 文件值 < 命令行覆盖 的顺序构造并校验命令配置

    Args:
        command: 命令名
        section: 配置文件中该命令的节
        overrides: 命令行覆盖项

    Returns:
        对应的配置 dataclass（已 validate）

    Raises:
        ConfigError: 未知命令、未知键、类型错误或校验失败
    """
    if command not in SECTIONS:
        raise ConfigError(f"未知命令 '{command}'")
    cls = SECTIONS[command]
    hints = typing.get_type_hints(cls)
    names = [f.name for f in fields(cls)]

    values: Dict[str, Any] = {}
    for source in (section or {}, overrides or {}):
        for key, value in source.items():
            if key not in names:
                raise ConfigError(f"{command} 不支持配置项 '{key}'（可选: {', '.join(names)}）")
            values[key] = coerce(value, hints[key], f"{command}.{key}")
    config = cls(**values)
    config.validate()
    return config
