#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实例提取与匹配

实例 = 细胞核类像素的 4 连通分量；轮廓类充当分隔线。
"""
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from ribcage_seg.errors import EvaluationError
from ribcage_seg.models import NUCLEUS, NUM_CLASSES, InstanceMap, MatchResult, SegmentationMap

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
MATCH_THRESHOLD = 0.5
# 2·contour_width + 1，轮廓宽 2 时相贴细胞核之间最多 5 像素
TOUCHING_GAP = 5


def probmap_to_classes(prob: np.ndarray, tol: float = 1e-6) -> SegmentationMap:
    """
    概率图逐像素取 argmax，平局取较小类别（背景 < 细胞核 < 轮廓）

    Args:
        prob: H×W×3 概率
        tol: 每像素概率和偏离 1 的容差

    Raises:
        EvaluationError: 形状不对、含负数/非有限值或和不为 1
    """
    prob = np.asarray(prob, dtype=np.float64)
    if prob.ndim != 3 or prob.shape[2] != NUM_CLASSES:
        raise EvaluationError(f"概率图必须是 H×W×3，实际形状 {prob.shape}")
    if not np.all(np.isfinite(prob)) or np.any(prob < 0):
        raise EvaluationError("概率图含负数或非有限值")
    deviation = np.abs(prob.sum(axis=-1) - 1.0)
    if deviation.size and deviation.max() > tol:
        row, col = np.unravel_index(int(np.argmax(deviation)), deviation.shape)
        raise EvaluationError(f"像素 (row={row}, col={col}) 概率和为 {prob[row, col].sum():.9f}，不等于 1")
    # np.argmax 遇到并列时返回第一个下标
    return SegmentationMap(np.argmax(prob, axis=-1).astype(np.uint8))


def extract_instances(label: SegmentationMap) -> InstanceMap:
    """
    细胞核像素的 4 连通分量；编号按光栅顺序首个像素排列

    Args:
        label: 三类分割图

    Returns:
        InstanceMap
    """
    ids, count = ndimage.label(label.classes == NUCLEUS, structure=FOUR_CONNECTED)
    if count:
        # 按首次出现的光栅位置重新编号
        flat = ids.ravel()
        present, first = np.unique(flat, return_index=True)
        order = present[present > 0][np.argsort(first[present > 0], kind="stable")]
        remap = np.zeros(count + 1, dtype=np.int64)
        remap[order] = np.arange(1, count + 1)
        ids = remap[ids]
    return InstanceMap(ids=ids.astype(np.int64), count=int(count))


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """
    |a∩b| / |a∪b|

    Args:
        a, b: 同形状的布尔像素集合

    Raises:
        EvaluationError: 两个集合都为空
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        raise EvaluationError("两个像素集合都为空，Jaccard 无定义")
    return np.count_nonzero(a & b) / union


def jaccard_matrix(pred: InstanceMap, gt: InstanceMap) -> np.ndarray:
    """所有 (gt, pred) 实例对的 Jaccard，形状 n_gt × n_pred"""
    kp, kg = pred.count, gt.count
    joint = gt.ids.ravel() * (kp + 1) + pred.ids.ravel()
    inter = np.bincount(joint, minlength=(kg + 1) * (kp + 1)).reshape(kg + 1, kp + 1)
    area_gt = inter.sum(axis=1)
    area_pred = inter.sum(axis=0)
    inter = inter[1:, 1:]
    union = area_gt[1:, None] + area_pred[None, 1:] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(union > 0, inter / np.maximum(union, 1), 0.0)


def match_instances(pred: InstanceMap, gt: InstanceMap) -> MatchResult:
    """
    每个人工实例取 Jaccard 最大的预测实例，Jaccard > 0.5 记为 TP

    阈值 > 0.5 保证一一对应：一个预测实例不可能和两个不相交的人工实例同时超过 0.5。

    Raises:
        EvaluationError: 尺寸不一致
    """
    if pred.shape != gt.shape:
        raise EvaluationError(f"预测 {pred.shape} 与人工标注 {gt.shape} 尺寸不一致")
    result = MatchResult(n_pred=pred.count, n_gt=gt.count)
    if pred.count == 0 or gt.count == 0:
        return result
    scores = jaccard_matrix(pred, gt)
    best = np.argmax(scores, axis=1)
    for g, p in enumerate(best):
        score = float(scores[g, p])
        if score > MATCH_THRESHOLD:
            result.pairs.append((g + 1, int(p) + 1, score))
    return result


def touching_pairs(gt: InstanceMap, max_gap: int = TOUCHING_GAP) -> List[Tuple[int, int]]:
    """
    相距不超过 max_gap 像素的人工实例对（靠轮廓类才能分开的相贴细胞）

    Returns:
        list: (id_a, id_b)，id_a < id_b
    """
    pairs = set()
    if gt.count < 2:
        return []
    square = ndimage.generate_binary_structure(2, 2)
    for inst, box in enumerate(ndimage.find_objects(gt.ids), 1):
        if box is None:
            continue
        # 只在外扩 max_gap 的包围盒里膨胀
        rows = slice(max(box[0].start - max_gap, 0), min(box[0].stop + max_gap, gt.shape[0]))
        cols = slice(max(box[1].start - max_gap, 0), min(box[1].stop + max_gap, gt.shape[1]))
        window = gt.ids[rows, cols]
        grown = ndimage.binary_dilation(window == inst, structure=square, iterations=max_gap)
        for other in np.unique(window[grown]):
            if other > inst:
                pairs.add((inst, int(other)))
    return sorted(pairs)


def separation_rate(match: MatchResult, pairs: List[Tuple[int, int]]) -> Tuple[float, int]:
    """
    相贴细胞对中两者都被匹配到不同预测实例的比例

    Returns:
        (比例, 分开的对数)；没有相贴对时比例记为 1.0
    """
    if not pairs:
        return 1.0, 0
    matched = {g: p for g, p, _ in match.pairs}
    separated = sum(1 for a, b in pairs if a in matched and b in matched and matched[a] != matched[b])
    return separated / len(pairs), separated
