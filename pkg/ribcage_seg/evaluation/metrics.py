#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实例级指标

Prec = TP/(TP+FP)，Rec = TP/(TP+FN)，F = 2·P·R/(P+R)，
J = TP 对的平均 Jaccard；分母为 0 时约定为 0。
另有逐像素准确率（三类分割图逐像素一致的比例）。
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ribcage_seg.errors import EvaluationError
from ribcage_seg.models import MatchResult, Metrics, SegmentationMap

METRIC_COLUMNS = ["frame", "tp", "fp", "fn", "precision", "recall", "f", "mean_jaccard", "pixel_accuracy"]

PixelCounts = Tuple[int, int]


def f_measure(precision: float, recall: float) -> float:
    """P 与 R 的调和平均；P + R = 0 时为 0"""
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def pixel_counts(pred: SegmentationMap, gt: SegmentationMap) -> PixelCounts:
    """
    (类别一致的像素数, 总像素数)

    Raises:
        EvaluationError: 尺寸不一致
    """
    if pred.shape != gt.shape:
        raise EvaluationError(f"预测 {pred.shape} 与人工标注 {gt.shape} 尺寸不一致")
    return int(np.count_nonzero(pred.classes == gt.classes)), int(gt.classes.size)


def pixel_accuracy(pred: SegmentationMap, gt: SegmentationMap) -> float:
    """逐像素准确率；空图为 NaN"""
    correct, total = pixel_counts(pred, gt)
    return correct / total if total else math.nan


def batch_pixel_accuracy(probs: np.ndarray, one_hot: np.ndarray) -> float:
    """B×H×W×3 概率与 one-hot 标签按 argmax 比较（平局取较小类别）"""
    return float(np.mean(np.argmax(probs, axis=-1) == np.argmax(one_hot, axis=-1)))


def _from_counts(tp: int, fp: int, fn: int, jaccards: Sequence[float],
                 pixels: Optional[PixelCounts]) -> Metrics:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    mean_j = float(np.mean(jaccards)) if len(jaccards) else 0.0
    accuracy = pixels[0] / pixels[1] if pixels and pixels[1] else math.nan
    return Metrics(tp, fp, fn, precision, recall, f_measure(precision, recall), mean_j, accuracy)


def compute_metrics(match: MatchResult, pixels: Optional[PixelCounts] = None) -> Metrics:
    """
    单帧指标

    Args:
        match: 实例匹配结果
        pixels: pixel_counts() 的结果；不给时像素准确率为 NaN
    """
    return _from_counts(match.tp, match.fp, match.fn, [j for _, _, j in match.pairs], pixels)


def aggregate_metrics(matches: Sequence[MatchResult], pixels: Optional[Sequence[PixelCounts]] = None) -> Metrics:
    """多帧汇总：TP/FP/FN 与像素计数累加，J 对所有 TP 对取平均"""
    tp = sum(m.tp for m in matches)
    fp = sum(m.fp for m in matches)
    fn = sum(m.fn for m in matches)
    jaccards = [j for m in matches for _, _, j in m.pairs]
    pooled = None
    if pixels is not None:
        pooled = (sum(c for c, _ in pixels), sum(t for _, t in pixels))
    return _from_counts(tp, fp, fn, jaccards, pooled)


def metrics_frame(rows: List[Tuple[str, Metrics]]) -> pd.DataFrame:
    """每帧指标表，列为 frame,tp,fp,fn,precision,recall,f,mean_jaccard,pixel_accuracy"""
    records = [{"frame": name, **m.to_dict()} for name, m in rows]
    return pd.DataFrame(records, columns=METRIC_COLUMNS)
