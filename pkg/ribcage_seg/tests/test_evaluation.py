#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""实例提取、匹配与实例级指标"""
import numpy as np
import pytest

from ribcage_seg.errors import EvaluationError
from ribcage_seg.evaluation import (
    aggregate_metrics,
    compute_metrics,
    extract_instances,
    f_measure,
    jaccard,
    jaccard_matrix,
    match_instances,
    metrics_frame,
    pixel_accuracy,
    pixel_counts,
    probmap_to_classes,
    separation_rate,
    touching_pairs,
)
from ribcage_seg.models import InstanceMap, MatchResult, SegmentationMap


def instances_from(rows):
    """由 0/1 字符画得到实例图"""
    classes = np.array([[int(c) for c in row] for row in rows], dtype=np.uint8)
    return extract_instances(SegmentationMap(classes))


def brute_force_match(pred: InstanceMap, gt: InstanceMap):
    pairs = []
    for g in range(1, gt.count + 1):
        best, best_p = 0.0, None
        a = gt.ids == g
        for p in sorted(int(v) for v in np.unique(pred.ids[a]) if v > 0):
            b = pred.ids == p
            union = np.count_nonzero(a | b)
            score = np.count_nonzero(a & b) / union if union else 0.0
            if score > best:
                best, best_p = score, p
        if best > 0.5:
            pairs.append((g, best_p))
    return pairs


# ==================== 概率图 -> 类别 ====================

def test_probmap_argmax_and_ties():
    prob = np.array([[[0.2, 0.5, 0.3], [0.4, 0.4, 0.2], [0.25, 0.375, 0.375], [1 / 3, 1 / 3, 1 / 3]]])
    np.testing.assert_array_equal(probmap_to_classes(prob).classes, [[1, 0, 1, 0]])


def test_probmap_rejects_bad_sums():
    with pytest.raises(EvaluationError, match="row=0, col=1"):
        probmap_to_classes(np.array([[[1.0, 0.0, 0.0], [0.5, 0.2, 0.2]]]))
    with pytest.raises(EvaluationError):
        probmap_to_classes(np.zeros((2, 2, 4)))


# ==================== 实例 ====================

def test_extract_instances_raster_order_and_connectivity():
    inst = instances_from([
        "0011",
        "1000",
        "1001",
        "0001",
    ])
    assert inst.count == 3
    np.testing.assert_array_equal(inst.ids, [[0, 0, 1, 1], [2, 0, 0, 0], [2, 0, 0, 3], [0, 0, 0, 3]])


def test_diagonal_pixels_are_separate():
    assert instances_from(["10", "01"]).count == 2


def test_contour_separates_touching_cells():
    classes = np.array([[1, 1, 2, 1, 1]], dtype=np.uint8)
    assert extract_instances(SegmentationMap(classes)).count == 2


def test_jaccard_value():
    a = np.zeros(10, dtype=bool)
    b = np.zeros(10, dtype=bool)
    a[0:4] = True
    b[1:5] = True
    assert jaccard(a, b) == pytest.approx(3 / 5)
    with pytest.raises(EvaluationError):
        jaccard(np.zeros(3, dtype=bool), np.zeros(3, dtype=bool))


def test_match_perfect():
    gt = instances_from(["1100", "0000", "0011"])
    result = match_instances(gt, gt)
    assert (result.tp, result.fp, result.fn) == (2, 0, 0)
    assert all(j == 1.0 for _, _, j in result.pairs)


def test_match_split_prediction():
    # 一个人工实例被预测成两块
    gt = instances_from(["11111"])
    pred = instances_from(["11101"])
    result = match_instances(pred, gt)
    assert (result.tp, result.fp, result.fn) == (1, 1, 0)
    assert result.pairs[0][2] == pytest.approx(0.6)
    pred = instances_from(["11011"])
    result = match_instances(pred, gt)
    assert (result.tp, result.fp, result.fn) == (0, 2, 1)
    # Jaccard 恰好 0.5 不算匹配
    assert match_instances(instances_from(["1101"]), instances_from(["1111"])).tp == 0


def test_match_empty_maps():
    empty = instances_from(["000"])
    full = instances_from(["110"])
    assert (match_instances(empty, empty).tp, match_instances(empty, empty).fn) == (0, 0)
    result = match_instances(empty, full)
    assert (result.tp, result.fp, result.fn) == (0, 0, 1)


def test_match_shape_mismatch():
    with pytest.raises(EvaluationError):
        match_instances(instances_from(["11"]), instances_from(["111"]))


def test_match_agrees_with_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        pred = extract_instances(SegmentationMap((rng.random((32, 32)) < 0.55).astype(np.uint8)))
        gt = extract_instances(SegmentationMap((rng.random((32, 32)) < 0.55).astype(np.uint8)))
        result = match_instances(pred, gt)
        assert [(g, p) for g, p, _ in result.pairs] == brute_force_match(pred, gt)
        assert len({p for _, p, _ in result.pairs}) == result.tp


def test_jaccard_matrix_shape():
    gt = instances_from(["1010"])
    pred = instances_from(["1000"])
    scores = jaccard_matrix(pred, gt)
    assert scores.shape == (2, 1)
    np.testing.assert_allclose(scores[:, 0], [1.0, 0.0])


# ==================== 指标 ====================

@pytest.mark.parametrize("precision,recall,expected", [(85.8, 86.5, 86.1), (81.2, 80.2, 80.7)])
def test_f_measure_reference_values(precision, recall, expected):
    assert f_measure(precision, recall) == pytest.approx(expected, abs=0.05)


def test_f_measure_zero_and_symmetry():
    assert f_measure(0.0, 0.0) == 0.0
    assert f_measure(0.3, 0.9) == pytest.approx(f_measure(0.9, 0.3))


def test_compute_metrics_counts():
    match = MatchResult(n_pred=5, n_gt=4, pairs=[(1, 1, 0.8), (2, 3, 0.6), (3, 2, 0.7)])
    m = compute_metrics(match)
    assert (m.tp, m.fp, m.fn) == (3, 2, 1)
    assert m.precision == pytest.approx(0.6)
    assert m.recall == pytest.approx(0.75)
    assert m.mean_jaccard == pytest.approx(0.7)


def test_swapping_roles_swaps_precision_and_recall():
    a = instances_from(["1100", "0001", "1000"])
    b = instances_from(["1100", "0000", "1001"])
    ab = compute_metrics(match_instances(a, b))
    ba = compute_metrics(match_instances(b, a))
    assert ab.precision == pytest.approx(ba.recall)
    assert ab.recall == pytest.approx(ba.precision)
    assert ab.f_measure == pytest.approx(ba.f_measure)


def test_aggregate_pools_counts():
    frames = [MatchResult(2, 2, [(1, 1, 1.0), (2, 2, 0.6)]), MatchResult(1, 3, [])]
    m = aggregate_metrics(frames)
    assert (m.tp, m.fp, m.fn) == (2, 1, 3)
    assert m.mean_jaccard == pytest.approx(0.8)
    table = metrics_frame([("a", compute_metrics(frames[0])), ("b", compute_metrics(frames[1]))])
    assert list(table.columns) == ["frame", "tp", "fp", "fn", "precision", "recall", "f", "mean_jaccard",
                                   "pixel_accuracy"]
    assert table.loc[1, "f"] == 0.0
    assert np.isnan(m.pixel_accuracy)


def test_empty_frame_metrics_are_zero():
    m = compute_metrics(MatchResult(0, 0, []))
    assert (m.precision, m.recall, m.f_measure, m.mean_jaccard) == (0.0, 0.0, 0.0, 0.0)


# ==================== 相贴细胞 ====================

def test_touching_pairs_within_gap():
    gt = instances_from([
        "1100000001",
        "1100000001",
        "0000000000",
        "0000000000",
        "0000000000",
        "0000000000",
        "1100000000",
    ])
    assert touching_pairs(gt, max_gap=4) == []
    assert touching_pairs(gt, max_gap=5) == [(1, 3)]
    assert touching_pairs(gt) == [(1, 3)]
    assert touching_pairs(gt, max_gap=7) == [(1, 3)]
    assert touching_pairs(gt, max_gap=8) == [(1, 2), (1, 3), (2, 3)]


def test_separation_rate():
    match = MatchResult(3, 3, [(1, 1, 0.9), (2, 2, 0.8)])
    assert separation_rate(match, [(1, 2), (2, 3)]) == (0.5, 1)
    assert separation_rate(match, []) == (1.0, 0)


# ==================== 逐像素准确率 ====================

def test_pixel_accuracy_counts_matching_classes():
    pred = SegmentationMap(np.array([[0, 1, 2, 2], [1, 1, 0, 0]]))
    gt = SegmentationMap(np.array([[0, 1, 2, 1], [1, 2, 0, 0]]))
    assert pixel_counts(pred, gt) == (6, 8)
    assert pixel_accuracy(pred, gt) == pytest.approx(0.75)
    assert pixel_accuracy(gt, gt) == 1.0
    with pytest.raises(EvaluationError):
        pixel_counts(pred, SegmentationMap(np.zeros((3, 3))))


def test_pixel_accuracy_pools_over_pixels():
    frames = [MatchResult(0, 0, []), MatchResult(0, 0, [])]
    m = aggregate_metrics(frames, [(9, 10), (1, 30)])
    assert m.pixel_accuracy == pytest.approx(10 / 40)
    assert compute_metrics(frames[0], (9, 10)).pixel_accuracy == pytest.approx(0.9)
