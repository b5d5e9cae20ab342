#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令实现

synth / train / segment / evaluate / gradcheck / report / sweep，
每个命令接收已校验的配置对象，只通过文件产出结果。
"""
import json
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from ribcage_seg.config import (
    EvaluateConfig,
    GradcheckConfig,
    ReportConfig,
    SegmentConfig,
    SweepConfig,
    SynthRunConfig,
    TrainRunConfig,
)
from ribcage_seg.data import (
    load_dataset,
    load_image,
    load_label,
    read_manifest,
    save_image,
    save_label,
    synth_generate,
    write_manifest,
)
from ribcage_seg.errors import ConfigError, DataError, EvaluationError, GradcheckFailed, ShapeError
from ribcage_seg.evaluation import (
    aggregate_metrics,
    compute_metrics,
    extract_instances,
    match_instances,
    metrics_frame,
    pixel_counts,
    probmap_to_classes,
    separation_rate,
    touching_pairs,
)
from ribcage_seg.evaluation.report import build_report
from ribcage_seg.log import get_logger
from ribcage_seg.models import Metrics
from ribcage_seg.networks import EstimatorParams, estimator_forward
from ribcage_seg.tensor.core import constant
from ribcage_seg.trainer import checkpoint_load, normalize_image, run_training
from ribcage_seg.verify import gradcheck_suite

logger = get_logger(__name__)

SWEEP_COLUMNS = ["run", "mode", "n_train", "tp", "fp", "fn", "precision", "recall", "f", "mean_jaccard",
                 "pixel_accuracy"]
RUN_PREFIX = {"adversarial": "adv", "cross_entropy": "ce"}
MIN_IMAGE_SIZE = 9


def sample_seed(seed: int, index: int) -> int:
    """第 index 个合成样本的种子"""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def segment_image(estimator: EstimatorParams, image: np.ndarray) -> np.ndarray:
    """
    整帧推理

    Args:
        estimator: θ_E（需要已有 BN 运行统计量）
        image: H×W 灰度图，任意尺寸 ≥ 9×9

    Returns:
        H×W×3 概率图
    """
    if min(image.shape) < MIN_IMAGE_SIZE:
        raise ShapeError(f"图像至少 {MIN_IMAGE_SIZE}×{MIN_IMAGE_SIZE}，实际 {image.shape}")
    x = constant(normalize_image(image)[None, :, :, None])
    return estimator_forward(estimator, x, mode="infer").value[0]


# ==================== synth ====================

def cmd_synth(config: SynthRunConfig) -> Path:
    """生成 count 个合成样本及清单，返回清单路径"""
    out = Path(config.output_dir)
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
        (out / "labels").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"无法创建输出目录 {out}: {e}") from e

    synth_config = config.synth_config()
    pairs = []
    for i in range(config.count):
        sample = synth_generate(synth_config, sample_seed(config.seed, i))
        name = f"sample_{i:04d}.png"
        save_image(out / "images" / name, sample.image)
        save_label(out / "labels" / name, sample.label)
        pairs.append((f"images/{name}", f"labels/{name}"))

    manifest = out / config.manifest_name
    write_manifest(manifest, pairs)
    logger.info(f"✅ 已生成 {config.count} 个样本: {manifest}")
    return manifest


# ==================== train ====================

def cmd_train(config: TrainRunConfig) -> Path:
    """训练并写检查点与 loss CSV，返回输出目录"""
    samples = load_dataset(config.manifest)
    logger.info(f"📊 数据集 {config.manifest}: {len(samples)} 个样本，使用前 {config.n_train} 个")
    state = None
    if config.resume:
        state = checkpoint_load(config.resume)
        logger.info(f"🔄 从检查点 {config.resume} 恢复，已完成 {state.step} 步")
    run_training(config.train_config(), samples, state, run_dir=config.output_dir, progress=config.progress)
    return Path(config.output_dir)


# ==================== segment ====================

def _input_images(source: str) -> List[Path]:
    path = Path(source)
    if path.is_dir():
        images = sorted(path.glob("*.png"))
    elif path.suffix.lower() == ".png":
        images = [path]
    elif path.exists():
        images = [image for image, _ in read_manifest(path)]
    else:
        raise DataError(f"输入不存在: {path}")
    if not images:
        raise DataError(f"{path} 中没有 PNG 图像")
    return images


def cmd_segment(config: SegmentConfig) -> List[Path]:
    """对输入图像做推理，写 RGB 标签（可选 .npy 概率图）"""
    state = checkpoint_load(config.checkpoint)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    written = []
    for path in _input_images(config.input):
        probs = segment_image(state.estimator, load_image(path))
        target = out / f"{path.stem}.png"
        save_label(target, probmap_to_classes(probs))
        if config.save_probabilities:
            np.save(out / f"{path.stem}.npy", probs)
        written.append(target)
        logger.debug(f"🔬 {path.name} -> {target}")
    logger.info(f"✅ 已分割 {len(written)} 张图像，输出目录 {out}")
    return written


# ==================== evaluate ====================

def _paired_files(pred_dir: Path, gt_dir: Path) -> List[str]:
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise EvaluationError(f"目录不存在: {d}")
    pred = {p.name for p in pred_dir.glob("*.png")}
    gt = {p.name for p in gt_dir.glob("*.png")}
    if pred != gt:
        missing_pred = sorted(gt - pred)
        missing_gt = sorted(pred - gt)
        raise EvaluationError(f"预测与标注文件不一致: 预测缺少 {missing_pred}，标注缺少 {missing_gt}")
    return sorted(gt)


def cmd_evaluate(config: EvaluateConfig) -> Dict:
    """逐帧与汇总指标，写 metrics.csv 与 summary.json"""
    pred_dir, gt_dir = Path(config.pred_dir), Path(config.gt_dir)
    names = _paired_files(pred_dir, gt_dir)

    rows, matches, pixels = [], [], []
    n_pairs = n_separated = 0
    for name in names:
        pred_label, gt_label = load_label(pred_dir / name), load_label(gt_dir / name)
        gt = extract_instances(gt_label)
        match = match_instances(extract_instances(pred_label), gt)
        counts = pixel_counts(pred_label, gt_label)
        pairs = touching_pairs(gt, config.touching_gap)
        _, separated = separation_rate(match, pairs)
        n_pairs += len(pairs)
        n_separated += separated
        rows.append((name, compute_metrics(match, counts)))
        matches.append(match)
        pixels.append(counts)

    total = aggregate_metrics(matches, pixels)
    summary = {
        "frames": len(names),
        **total.to_dict(),
        "touching_pairs": n_pairs,
        "separated_pairs": n_separated,
        "separation_rate": n_separated / n_pairs if n_pairs else 1.0,
    }

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_frame(rows).to_csv(out / "metrics.csv", index=False)
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    logger.info(f"📊 {len(names)} 帧: P={total.precision:.3f} R={total.recall:.3f} "
                f"F={total.f_measure:.3f} J={total.mean_jaccard:.3f} acc={total.pixel_accuracy:.4f} "
                f"相贴细胞分开 {n_separated}/{n_pairs}")
    return summary


# ==================== gradcheck ====================

def cmd_gradcheck(config: GradcheckConfig) -> pd.DataFrame:
    """
    运行梯度检查套件

    Raises:
        GradcheckFailed: 任一检查项超出容差
    """
    results = gradcheck_suite(config.seed, config.include_networks, config.fault or None, config.only or None)
    table = pd.DataFrame([r.to_dict() for r in results], columns=["op", "max_rel_error", "tolerance", "passed"])
    if config.output:
        Path(config.output).parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(config.output, index=False)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.3e}"))

    failed = [r.name for r in results if not r.passed]
    if failed:
        raise GradcheckFailed(f"梯度检查未通过: {', '.join(failed)}")
    logger.info(f"✅ 梯度检查全部通过（{len(results)} 项）")
    return table


# ==================== report ====================

def cmd_report(config: ReportConfig) -> Dict[str, Path]:
    """loss 曲线、指标柱状图与文本汇总"""
    outputs = build_report(config.loss_csv or None, config.metrics_csv or None, config.output_dir)
    print(outputs["summary"].read_text(encoding="utf-8"))
    return outputs


# ==================== sweep ====================

def _evaluate_model(estimator: EstimatorParams, samples) -> Metrics:
    matches, pixels = [], []
    for sample in samples:
        pred = probmap_to_classes(segment_image(estimator, sample.image))
        matches.append(match_instances(extract_instances(pred), extract_instances(sample.label)))
        pixels.append(pixel_counts(pred, sample.label))
    return aggregate_metrics(matches, pixels)


def _check_disjoint(train_manifest: str, val_manifest: str) -> Tuple[int, int]:
    for key, path in (("train_manifest", train_manifest), ("val_manifest", val_manifest)):
        if not Path(path).exists():
            raise ConfigError(f"sweep.{key} 指向的清单不存在: {path}")
    train = {image.resolve() for image, _ in read_manifest(train_manifest)}
    val = {image.resolve() for image, _ in read_manifest(val_manifest)}
    shared = sorted(str(p) for p in train & val)
    if shared:
        raise ConfigError(f"验证集与训练集有重叠的图像: {shared[:3]}")
    return len(train), len(val)


def cmd_sweep(config: SweepConfig) -> pd.DataFrame:
    """
    N_Train 对比实验：每个 n_train 训练对抗模型（可选交叉熵模型），在验证集上评估

    Returns:
        DataFrame，列为 run,mode,n_train,tp,fp,fn,precision,recall,f,mean_jaccard
    """
    _check_disjoint(config.train_manifest, config.val_manifest)
    train_samples = load_dataset(config.train_manifest)
    val_samples = load_dataset(config.val_manifest)
    if max(config.n_train_values) > len(train_samples):
        raise DataError(f"训练清单只有 {len(train_samples)} 个样本，少于 n_train={max(config.n_train_values)}")

    modes = ["adversarial"] + (["cross_entropy"] if config.include_cross_entropy else [])
    out = Path(config.output_dir)
    rows = []
    for n_train in config.n_train_values:
        for mode in modes:
            run = f"{RUN_PREFIX[mode]}_{n_train}"
            logger.info(f"🚀 [{run}] 训练 {config.total_steps} 步")
            state = run_training(config.train_config(n_train, mode), train_samples,
                                 run_dir=out / run, progress=config.progress)
            metrics = _evaluate_model(state.estimator, val_samples)
            rows.append({"run": run, "mode": mode, "n_train": n_train, **metrics.to_dict()})
            logger.info(f"📊 [{run}] F={metrics.f_measure:.3f} J={metrics.mean_jaccard:.3f}")

    table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "sweep.csv", index=False)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    logger.info(f"💾 对比结果已保存: {out / 'sweep.csv'}")
    return table


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "segment": cmd_segment,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "report": cmd_report,
    "sweep": cmd_sweep,
}
