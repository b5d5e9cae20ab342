#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
检查点读写

文件布局:
    MAGIC (8 字节) | 版本 uint32 LE | 头长度 uint64 LE | JSON 头 (UTF-8) | 数组数据

JSON 头保存配置、步数、RNG 状态、Adam 步数、loss 历史，
以及数组清单 [{name, shape, offset}]；数组按清单顺序以小端 float64 连续存放。
"""
import json
import struct
from dataclasses import asdict, fields
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from ribcage_seg.errors import CheckpointError
from ribcage_seg.log import get_logger
from ribcage_seg.models import LossRecord
from ribcage_seg.networks import DiscriminatorConfig, EstimatorConfig, init_params
from ribcage_seg.trainer.adam import AdamState
from ribcage_seg.trainer.loop import TrainConfig, TrainState

logger = get_logger(__name__)

MAGIC = b"RIBCAGE\x00"
FORMAT_VERSION = 2
_PREFIX = struct.Struct("<IQ")
_DTYPE = np.dtype("<f8")

PathLike = Union[str, Path]


def _arrays(state: TrainState) -> List[Tuple[str, np.ndarray]]:
    """按固定顺序列出需要保存的全部数组"""
    out = []
    for prefix, params, adam in (("estimator", state.estimator, state.adam_e),
                                 ("discriminator", state.discriminator, state.adam_d)):
        named = params.named_parameters()
        for name, array in named.items():
            out.append((f"{prefix}/param/{name}", array))
        for name, bn in params.named_buffers().items():
            out.append((f"{prefix}/buffer/{name}/running_mean", bn.running_mean))
            out.append((f"{prefix}/buffer/{name}/running_var", bn.running_var))
        for name in named:
            out.append((f"{prefix}/adam_m/{name}", adam.m[name]))
            out.append((f"{prefix}/adam_v/{name}", adam.v[name]))
    return out


def _encode_config(config) -> dict:
    return {f.name: getattr(config, f.name) for f in fields(config)}


def _train_config(raw: dict) -> TrainConfig:
    names = {f.name for f in fields(TrainConfig)}
    return TrainConfig(**{k: v for k, v in raw.items() if k in names})


def _estimator_config(raw: dict) -> EstimatorConfig:
    raw = dict(raw)
    raw["layers"] = tuple(tuple(layer) for layer in raw["layers"])
    return EstimatorConfig(**raw)


def _discriminator_config(raw: dict) -> DiscriminatorConfig:
    raw = dict(raw)
    raw["spine"] = tuple(tuple(s) for s in raw["spine"])
    raw["fusion"] = tuple(raw["fusion"])
    raw["fc"] = tuple(raw["fc"])
    return DiscriminatorConfig(**raw)


def checkpoint_save(state: TrainState, path: PathLike) -> Path:
    """
    保存训练状态

    Args:
        state: 训练状态
        path: 输出文件路径

    Returns:
        Path: 写入的文件
    """
    path = Path(path)
    manifest, blobs, offset = [], [], 0
    for name, array in _arrays(state):
        data = np.ascontiguousarray(array, dtype=_DTYPE).tobytes()
        manifest.append({"name": name, "shape": list(np.shape(array)), "offset": offset})
        blobs.append(data)
        offset += len(data)

    header = {
        "format_version": FORMAT_VERSION,
        "step": state.step,
        "train_config": _encode_config(state.config),
        "estimator_config": asdict(state.estimator.config),
        "discriminator_config": asdict(state.discriminator.config),
        "rng_state": state.rng.bit_generator.state,
        "adam_steps": {"estimator": state.adam_e.step, "discriminator": state.adam_d.step},
        "bn_batches": {
            "estimator": {k: bn.num_batches for k, bn in state.estimator.named_buffers().items()},
            "discriminator": {k: bn.num_batches for k, bn in state.discriminator.named_buffers().items()},
        },
        "history": [[r.step, r.loss_d, r.loss_e, r.d_real_mean, r.d_fake_mean, r.pixel_accuracy]
                    for r in state.history],
        "arrays": manifest,
        "data_bytes": offset,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_PREFIX.pack(FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)
    logger.debug(f"💾 检查点已保存: {path} (step {state.step})")
    return path


def _read_header(raw: bytes, path: Path) -> Tuple[dict, bytes]:
    if len(raw) < len(MAGIC) + _PREFIX.size or raw[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} 不是检查点文件（文件头不匹配）")
    version, header_len = _PREFIX.unpack_from(raw, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path} 的格式版本为 {version}，当前只支持版本 {FORMAT_VERSION}")
    start = len(MAGIC) + _PREFIX.size
    if len(raw) < start + header_len:
        raise CheckpointError(f"{path} 已截断：JSON 头不完整")
    try:
        header = json.loads(raw[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path} 的 JSON 头损坏: {e}") from e
    data = raw[start + header_len:]
    if len(data) != header.get("data_bytes"):
        raise CheckpointError(
            f"{path} 已截断或损坏：数据区 {len(data)} 字节，头中记录 {header.get('data_bytes')} 字节"
        )
    return header, data


def checkpoint_load(path: PathLike) -> TrainState:
    """
    读取训练状态

    Raises:
        CheckpointError: 文件缺失、截断、损坏、版本不匹配或数组清单与网络结构不符
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"无法读取检查点 {path}: {e}") from e
    header, data = _read_header(raw, path)

    try:
        config = _train_config(header["train_config"])
        estimator = init_params(0, _estimator_config(header["estimator_config"]))
        discriminator = init_params(0, _discriminator_config(header["discriminator_config"]))
        state = TrainState(
            config=config,
            estimator=estimator,
            discriminator=discriminator,
            adam_e=AdamState.fresh(estimator.named_parameters()),
            adam_d=AdamState.fresh(discriminator.named_parameters()),
            rng=np.random.Generator(np.random.PCG64()),
            step=int(header["step"]),
        )
        state.rng.bit_generator.state = header["rng_state"]
        state.adam_e.step = int(header["adam_steps"]["estimator"])
        state.adam_d.step = int(header["adam_steps"]["discriminator"])
        for prefix, params in (("estimator", estimator), ("discriminator", discriminator)):
            for name, bn in params.named_buffers().items():
                bn.num_batches = int(header["bn_batches"][prefix][name])
        state.history = [LossRecord(int(s), float(ld), float(le), float(dr), float(df), float(acc))
                         for s, ld, le, dr, df, acc in header["history"]]
        manifest = header["arrays"]
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path} 的头字段缺失或无效: {e}") from e

    expected = _arrays(state)
    names = [entry["name"] for entry in manifest]
    if names != [name for name, _ in expected]:
        missing = sorted(set(name for name, _ in expected) - set(names))
        extra = sorted(set(names) - set(name for name, _ in expected))
        raise CheckpointError(f"{path} 的数组清单与网络结构不符，缺少 {missing[:5]}，多出 {extra[:5]}")

    loaded: Dict[str, np.ndarray] = {}
    for entry, (name, target) in zip(manifest, expected):
        shape = tuple(entry["shape"])
        if shape != np.shape(target):
            raise CheckpointError(f"{path} 中 {name} 的形状 {shape} 与网络结构 {np.shape(target)} 不符")
        count = int(np.prod(shape, dtype=np.int64))
        offset = int(entry["offset"])
        if offset + count * _DTYPE.itemsize > len(data):
            raise CheckpointError(f"{path} 中 {name} 超出数据区")
        loaded[name] = np.frombuffer(data, dtype=_DTYPE, count=count, offset=offset).reshape(shape)

    _restore(state, loaded)
    logger.debug(f"✅ 检查点已加载: {path} (step {state.step})")
    return state


def _restore(state: TrainState, loaded: Dict[str, np.ndarray]) -> None:
    for prefix, params, adam in (("estimator", state.estimator, state.adam_e),
                                 ("discriminator", state.discriminator, state.adam_d)):
        for name, array in params.named_parameters().items():
            array[...] = loaded[f"{prefix}/param/{name}"]
            adam.m[name][...] = loaded[f"{prefix}/adam_m/{name}"]
            adam.v[name][...] = loaded[f"{prefix}/adam_v/{name}"]
        for name, bn in params.named_buffers().items():
            bn.running_mean = loaded[f"{prefix}/buffer/{name}/running_mean"].copy()
            bn.running_var = loaded[f"{prefix}/buffer/{name}/running_var"].copy()
