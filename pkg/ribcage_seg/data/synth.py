#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
合成显微图像生成器

亮核暗背景：随机椭圆细胞核（部分成对相贴），软边缘、光照梯度、高斯噪声；
标签由椭圆几何解析得到，细胞核外圈 contour_width 像素为轮廓类。
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from ribcage_seg.errors import ConfigError, SynthesisError
from ribcage_seg.log import get_logger
from ribcage_seg.models import BACKGROUND, CONTOUR, NUCLEUS, LabeledSample, SegmentationMap

logger = get_logger(__name__)

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
SQUARE = ndimage.generate_binary_structure(2, 2)


@dataclass
class SynthConfig:
    """合成样本参数"""
    height: int = 256
    width: int = 256
    min_cells: int = 8
    max_cells: int = 14
    radius_min: float = 6.0           # 椭圆半轴范围（像素）
    radius_max: float = 11.0
    adjacent_fraction: float = 0.3    # 成对相贴的细胞比例
    background_level: float = 0.1
    nucleus_level: float = 0.8
    noise_sigma: float = 0.04
    blur_sigma: float = 1.0
    illumination: float = 0.2         # 光照梯度幅度
    contour_width: int = 2
    max_retries: int = 200

    def validate(self) -> None:
        if self.height < 64 or self.width < 64:
            raise ConfigError(f"合成图像尺寸至少 64×64，实际 {self.height}×{self.width}")
        if self.radius_min < 3 or self.radius_max < self.radius_min:
            raise ConfigError(f"椭圆半轴范围无效: [{self.radius_min}, {self.radius_max}]，要求 3 <= min <= max")
        if self.min_cells < 0 or self.max_cells < self.min_cells:
            raise ConfigError(f"细胞数量范围无效: [{self.min_cells}, {self.max_cells}]")
        if not 0.0 <= self.adjacent_fraction <= 1.0:
            raise ConfigError(f"adjacent_fraction 必须在 [0,1] 内，实际 {self.adjacent_fraction}")
        if self.noise_sigma < 0 or self.blur_sigma < 0:
            raise ConfigError("noise_sigma / blur_sigma 不能为负")
        if self.contour_width < 1:
            raise ConfigError(f"contour_width 至少为 1，实际 {self.contour_width}")
        if self.max_retries < 1:
            raise ConfigError(f"max_retries 必须为正，实际 {self.max_retries}")

    @property
    def touch_gap(self) -> int:
        """相贴细胞两个细胞核之间允许的最大棋盘距离"""
        return 2 * self.contour_width + 1


@dataclass
class Ellipse:
    cy: float
    cx: float
    a: float        # 沿 theta 方向的半轴
    b: float
    theta: float

    def mask(self, shape: Tuple[int, int]) -> np.ndarray:
        yy, xx = np.mgrid[0:shape[0], 0:shape[1]]
        dy, dx = yy - self.cy, xx - self.cx
        cos, sin = np.cos(self.theta), np.sin(self.theta)
        u = (dx * cos + dy * sin) / self.a
        v = (-dx * sin + dy * cos) / self.b
        return u * u + v * v <= 1.0

    def radius_along(self, phi: float) -> float:
        """中心沿方向 phi 到边界的距离"""
        d = phi - self.theta
        return self.a * self.b / np.hypot(self.b * np.cos(d), self.a * np.sin(d))

    @property
    def extent(self) -> float:
        return max(self.a, self.b)


def _random_ellipse(rng: np.random.Generator, config: SynthConfig) -> Tuple[float, float, float]:
    a = rng.uniform(config.radius_min, config.radius_max)
    b = rng.uniform(config.radius_min, config.radius_max)
    theta = rng.uniform(0.0, np.pi)
    return a, b, theta


def _inside(ellipse: Ellipse, config: SynthConfig) -> bool:
    margin = ellipse.extent + 2
    return (margin <= ellipse.cy <= config.height - 1 - margin
            and margin <= ellipse.cx <= config.width - 1 - margin)


def _nucleus_masks(masks: List[np.ndarray], contour_width: int) -> List[np.ndarray]:
    """
    每个细胞的核区域：自身椭圆腐蚀 contour_width，再去掉其他椭圆膨胀 contour_width 覆盖的部分
    """
    nuclei = []
    for i, mask in enumerate(masks):
        core = ndimage.binary_erosion(mask, structure=FOUR_CONNECTED, iterations=contour_width)
        others = np.zeros_like(mask)
        for j, other in enumerate(masks):
            if j != i:
                others |= other
        if others.any():
            core &= ~ndimage.binary_dilation(others, structure=FOUR_CONNECTED, iterations=contour_width)
        nuclei.append(core)
    return nuclei


def _single_component(mask: np.ndarray) -> bool:
    _, count = ndimage.label(mask, structure=FOUR_CONNECTED)
    return count == 1


def _within(a: np.ndarray, b: np.ndarray, gap: int) -> bool:
    """a 膨胀 gap 次（8 邻域）后是否碰到 b"""
    return bool((ndimage.binary_dilation(a, structure=SQUARE, iterations=gap) & b).any())


def _free(mask: np.ndarray, occupied: np.ndarray, gap: int) -> bool:
    return not occupied.any() or not _within(mask, occupied, gap)


def _place_single(rng, config, occupied, gap, index) -> Tuple[Ellipse, np.ndarray]:
    shape = (config.height, config.width)
    for _ in range(config.max_retries):
        a, b, theta = _random_ellipse(rng, config)
        extent = max(a, b) + 2
        if 2 * extent >= min(shape) - 1:
            continue
        cy = rng.uniform(extent, config.height - 1 - extent)
        cx = rng.uniform(extent, config.width - 1 - extent)
        ellipse = Ellipse(cy, cx, a, b, theta)
        mask = ellipse.mask(shape)
        if not _free(mask, occupied, gap):
            continue
        if not _single_component(_nucleus_masks([mask], config.contour_width)[0]):
            continue
        return ellipse, mask
    raise SynthesisError(
        f"重试 {config.max_retries} 次后仍无法放置第 {index + 1} 个细胞，请减少细胞数量或缩小半径（降低密度）"
    )


def _place_partner(rng, config, anchor: Ellipse, anchor_mask, occupied, gap, index) -> Tuple[Ellipse, np.ndarray]:
    """放置与 anchor 相贴的细胞：沿随机方向把两个椭圆的边界对齐，重叠 1 像素"""
    shape = (config.height, config.width)
    for _ in range(config.max_retries):
        a, b, theta = _random_ellipse(rng, config)
        phi = rng.uniform(0.0, 2.0 * np.pi)
        partner = Ellipse(0.0, 0.0, a, b, theta)
        distance = anchor.radius_along(phi) + partner.radius_along(phi + np.pi) - 1.0
        partner.cy = anchor.cy + distance * np.sin(phi)
        partner.cx = anchor.cx + distance * np.cos(phi)
        if not _inside(partner, config):
            continue
        mask = partner.mask(shape)
        if not _free(mask, occupied, gap):
            continue
        nuclei = _nucleus_masks([anchor_mask, mask], config.contour_width)
        if not all(_single_component(n) for n in nuclei):
            continue
        if not _within(nuclei[0], nuclei[1], config.touch_gap):
            continue
        return partner, mask
    raise SynthesisError(
        f"重试 {config.max_retries} 次后仍无法为第 {index + 1} 个细胞放置相贴的细胞，请降低细胞密度"
    )


def _instance_pairs(nuclei: List[np.ndarray], pairs: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """细胞下标对 -> 实例编号对（实例按首个像素的光栅顺序编号）"""
    first = [int(np.argmax(n.ravel())) for n in nuclei]
    rank = np.empty(len(nuclei), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(1, len(nuclei) + 1)
    return sorted(tuple(sorted((int(rank[a]), int(rank[b])))) for a, b in pairs)


def synth_generate(config: SynthConfig, seed: int) -> LabeledSample:
    """
    生成一张合成样本

    相贴细胞对的细胞核相距不超过 touch_gap，其余任意两个细胞相距大于 touch_gap，
    因此 touching_pairs(gt, touch_gap) 恰好找回设计的相贴对

    Args:
        config: 合成参数
        seed: 随机种子，(config, seed) 完全决定输出

    Returns:
        LabeledSample，touching 为设计的相贴实例对

    Raises:
        ConfigError: 参数无效
        SynthesisError: 有限次重试内放不下指定数量的细胞
    """
    config.validate()
    rng = np.random.default_rng(seed)
    shape = (config.height, config.width)
    n_cells = int(rng.integers(config.min_cells, config.max_cells + 1))
    n_pairs = min(int(round(config.adjacent_fraction * n_cells / 2.0)), n_cells // 2)
    gap = config.touch_gap + 1

    occupied = np.zeros(shape, dtype=bool)
    masks: List[np.ndarray] = []
    designed: List[Tuple[int, int]] = []
    for _ in range(n_pairs):
        anchor, anchor_mask = _place_single(rng, config, occupied, gap, len(masks))
        _, partner_mask = _place_partner(rng, config, anchor, anchor_mask, occupied, gap, len(masks))
        designed.append((len(masks), len(masks) + 1))
        masks.extend([anchor_mask, partner_mask])
        occupied |= anchor_mask | partner_mask
    while len(masks) < n_cells:
        _, mask = _place_single(rng, config, occupied, gap, len(masks))
        masks.append(mask)
        occupied |= mask

    classes = np.full(shape, BACKGROUND, dtype=np.uint8)
    classes[occupied] = CONTOUR
    nuclei = _nucleus_masks(masks, config.contour_width)
    for nucleus in nuclei:
        classes[nucleus] = NUCLEUS

    image = _render(rng, config, occupied)
    logger.debug(f"🧫 合成样本 seed={seed}: {n_cells} 个细胞，其中 {n_pairs} 对相贴")
    return LabeledSample(image=image, label=SegmentationMap(classes), touching=_instance_pairs(nuclei, designed))


def _render(rng: np.random.Generator, config: SynthConfig, cells: np.ndarray) -> np.ndarray:
    """软边缘亮核 + 线性光照梯度 + 高斯噪声"""
    soft = cells.astype(np.float64)
    if config.blur_sigma > 0:
        soft = ndimage.gaussian_filter(soft, config.blur_sigma)
    image = config.background_level + (config.nucleus_level - config.background_level) * soft

    psi = rng.uniform(0.0, 2.0 * np.pi)
    yy, xx = np.mgrid[0:config.height, 0:config.width]
    ramp = xx * np.cos(psi) + yy * np.sin(psi)
    span = ramp.max() - ramp.min()
    if span > 0:
        image = image + config.illumination * ((ramp - ramp.min()) / span - 0.5)

    if config.noise_sigma > 0:
        image = image + rng.normal(0.0, config.noise_sigma, size=image.shape)
    return image
