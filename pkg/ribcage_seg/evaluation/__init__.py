"""评估模块 - 实例提取、匹配、实例级指标与报告"""
from ribcage_seg.evaluation.instances import (
    TOUCHING_GAP,
    extract_instances,
    jaccard,
    jaccard_matrix,
    match_instances,
    probmap_to_classes,
    separation_rate,
    touching_pairs,
)
from ribcage_seg.evaluation.metrics import (
    METRIC_COLUMNS,
    aggregate_metrics,
    batch_pixel_accuracy,
    compute_metrics,
    f_measure,
    metrics_frame,
    pixel_accuracy,
    pixel_counts,
)

__all__ = [
    "TOUCHING_GAP", "extract_instances", "jaccard", "jaccard_matrix", "match_instances", "probmap_to_classes",
    "separation_rate", "touching_pairs",
    "METRIC_COLUMNS", "aggregate_metrics", "batch_pixel_accuracy", "compute_metrics", "f_measure",
    "metrics_frame", "pixel_accuracy", "pixel_counts",
]
