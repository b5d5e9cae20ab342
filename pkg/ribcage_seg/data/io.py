#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
图像 / 标签 / 清单文件读写

灰度图: 8 位 PNG，强度线性映射到 0..255，原始范围写在 PNG 文本块里
标签:   8 位 RGB PNG，无损
清单:   每行 "图像路径<TAB>标签路径"，路径相对清单所在目录
"""
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from PIL import Image, PngImagePlugin, UnidentifiedImageError

from ribcage_seg.data.codec import decode_rgb, encode_rgb
from ribcage_seg.errors import DataError, ImageFormatError
from ribcage_seg.models import LabeledSample, SegmentationMap

PathLike = Union[str, Path]
RANGE_KEY = "ribcage_seg:range"


def _open(path: PathLike) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
        return img
    except FileNotFoundError as e:
        raise ImageFormatError(f"图像文件不存在: {path}") from e
    except (OSError, UnidentifiedImageError) as e:
        raise ImageFormatError(f"无法读取图像文件 {path}: {e}") from e


def save_image(path: PathLike, image: np.ndarray) -> None:
    """
    保存灰度图

    Args:
        path: 输出路径
        image: H×W 浮点强度
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ImageFormatError(f"灰度图必须是 H×W，实际形状 {image.shape}")
    lo, hi = float(image.min()), float(image.max())
    if hi > lo:
        quantized = np.rint((image - lo) / (hi - lo) * 255.0)
    else:
        quantized = np.zeros(image.shape)
    info = PngImagePlugin.PngInfo()
    info.add_text(RANGE_KEY, f"{lo!r} {hi!r}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(quantized.astype(np.uint8)).save(path, pnginfo=info)


def load_image(path: PathLike) -> np.ndarray:
    """
    读取灰度图；有范围文本块时还原到原始强度范围，否则映射到 [0,1]

    Raises:
        ImageFormatError: 文件不可读或不是单通道灰度图
    """
    img = _open(path)
    if img.mode != "L":
        raise ImageFormatError(f"{path} 不是 8 位单通道灰度图（mode={img.mode}，{len(img.getbands())} 通道）")
    data = np.asarray(img, dtype=np.float64) / 255.0
    stored = getattr(img, "text", {}).get(RANGE_KEY)
    if stored:
        lo, hi = (float(v) for v in stored.split())
        data = lo + data * (hi - lo)
    return data


def save_label(path: PathLike, label: SegmentationMap) -> None:
    """保存 RGB 标签"""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(encode_rgb(label)).save(path)


def load_label(path: PathLike) -> SegmentationMap:
    """
    读取 RGB 标签

    Raises:
        ImageFormatError: 不是 RGB 图
        LabelCodecError: 出现调色板之外的颜色
    """
    img = _open(path)
    if img.mode != "RGB":
        raise ImageFormatError(f"{path} 不是 RGB 标签图（mode={img.mode}，{len(img.getbands())} 通道）")
    return decode_rgb(np.asarray(img))


# ==================== 清单 ====================

def write_manifest(path: PathLike, pairs: Sequence[Tuple[str, str]]) -> None:
    """写清单，每行一对相对路径"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{image}\t{label}\n" for image, label in pairs]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.writelines(lines)


def read_manifest(path: PathLike) -> List[Tuple[Path, Path]]:
    """
    读清单

    Returns:
        list: (图像绝对路径, 标签绝对路径)

    Raises:
        DataError: 文件不存在或某行格式错误
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"清单文件不存在: {path}")
    base = path.parent
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"清单 {path} 第 {lineno} 行应为 '图像<TAB>标签'，实际: {line!r}")
            pairs.append((base / parts[0], base / parts[1]))
    return pairs


def load_dataset(manifest: PathLike) -> List[LabeledSample]:
    """按清单读入全部样本"""
    return [LabeledSample(load_image(img), load_label(lbl)) for img, lbl in read_manifest(manifest)]
