#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
训练 / 评估结果可视化

读入 loss CSV 和指标 CSV，生成 loss 曲线、指标柱状图和文本汇总
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from ribcage_seg.errors import DataError
from ribcage_seg.evaluation.metrics import METRIC_COLUMNS
from ribcage_seg.log import get_logger
from ribcage_seg.trainer.loop import LOSS_COLUMNS

logger = get_logger(__name__)

PathLike = Union[str, Path]


def _read_table(path: PathLike, columns: Sequence[str], required: Sequence[str],
                text_columns: Sequence[str] = ()) -> pd.DataFrame:
    """
    读取并校验 CSV

    Args:
        path: CSV 路径
        columns: 期望的表头
        required: 不允许为空的数值列
        text_columns: 保持为字符串的列

    Returns:
        DataFrame（空文件返回零行表）

    Raises:
        DataError: 文件不存在、表头不符或某行格式错误（报告行号）
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"CSV 文件不存在: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        return pd.DataFrame(columns=list(columns))
    except pd.errors.ParserError as e:
        raise DataError(f"{path} 格式错误: {e}") from e

    if list(frame.columns) != list(columns):
        raise DataError(f"{path} 第 1 行表头应为 {','.join(columns)}，实际 {','.join(map(str, frame.columns))}")

    out = pd.DataFrame(index=frame.index)
    for column in columns:
        raw = frame[column].str.strip()
        if column in text_columns:
            out[column] = raw
            continue
        values = pd.to_numeric(raw.replace("", np.nan), errors="coerce")
        bad = raw.ne("") & values.isna() & ~raw.str.lower().eq("nan")
        if column in required:
            bad |= values.isna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            # 表头占第 1 行
            raise DataError(f"{path} 第 {row + 2} 行 {column} 列的值 {raw.iloc[row]!r} 无效")
        out[column] = values
    return out


def read_loss_csv(path: PathLike) -> pd.DataFrame:
    """读 loss 历史（交叉熵模式下判别网络列为空）"""
    return _read_table(path, LOSS_COLUMNS, required=("step", "loss_e"))


def read_metrics_csv(path: PathLike) -> pd.DataFrame:
    """读逐帧指标"""
    numeric = [c for c in METRIC_COLUMNS if c not in ("frame", "pixel_accuracy")]
    return _read_table(path, METRIC_COLUMNS, required=numeric, text_columns=("frame",))


def plot_loss_curves(losses: pd.DataFrame, output_path: Path) -> Path:
    """loss 曲线 + 判别网络输出均值"""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(14, 5))

    ax1.plot(losses["step"], losses["loss_e"], linewidth=1.5, color="#2E86DE", label="L_E")
    if losses["loss_d"].notna().any():
        ax1.plot(losses["step"], losses["loss_d"], linewidth=1.5, color="#e74c3c", label="L_D")
    ax1.set_xlabel("step", fontsize=12)
    ax1.set_ylabel("loss", fontsize=12)
    ax1.set_title("Loss curves", fontsize=14, fontweight="bold")
    ax1.legend(loc="best", fontsize=10)
    ax1.grid(True, alpha=0.3)

    ax2.plot(losses["step"], losses["d_real_mean"], linewidth=1.5, color="#27ae60", label="D(real)")
    ax2.plot(losses["step"], losses["d_fake_mean"], linewidth=1.5, color="#8e44ad", label="D(fake)")
    ax2.axhline(y=0.5, color="gray", linestyle="--", linewidth=1, alpha=0.5)
    ax2.set_ylim(0.0, 1.0)
    ax2.set_xlabel("step", fontsize=12)
    ax2.set_ylabel("mean discriminator output", fontsize=12)
    ax2.set_title("Discriminator outputs", fontsize=14, fontweight="bold")
    ax2.legend(loc="best", fontsize=10)
    ax2.grid(True, alpha=0.3)

    plt.tight_layout()
    path = output_path / "loss_curves.png"
    plt.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    logger.info(f"✅ loss 曲线已保存: {path}")
    return path


def plot_metric_bars(metrics: pd.DataFrame, output_path: Path) -> Path:
    """逐帧 F / J 柱状图 + 汇总指标"""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(14, 5), gridspec_kw={"width_ratios": [3, 1]})

    x = np.arange(len(metrics))
    ax1.bar(x - 0.2, metrics["f"], width=0.4, color="#3498db", edgecolor="black", alpha=0.8, label="F")
    ax1.bar(x + 0.2, metrics["mean_jaccard"], width=0.4, color="#e67e22", edgecolor="black", alpha=0.8, label="J")
    ax1.set_xticks(x)
    ax1.set_xticklabels(metrics["frame"], rotation=60, ha="right", fontsize=8)
    ax1.set_ylim(0.0, 1.0)
    ax1.set_ylabel("score", fontsize=12)
    ax1.set_title("Per-frame F-measure / mean Jaccard", fontsize=14, fontweight="bold")
    ax1.legend(loc="best", fontsize=10)
    ax1.grid(True, alpha=0.3, axis="y")

    totals = _pooled(metrics)
    names = ["precision", "recall", "f"]
    ax2.bar(names, [totals[n] for n in names], color=["#27ae60", "#e74c3c", "#3498db"], edgecolor="black")
    for i, n in enumerate(names):
        ax2.text(i, totals[n] + 0.02, f"{totals[n] * 100:.1f}%", ha="center", fontsize=10)
    ax2.set_ylim(0.0, 1.1)
    ax2.set_title("Pooled", fontsize=14, fontweight="bold")
    ax2.grid(True, alpha=0.3, axis="y")

    plt.tight_layout()
    path = output_path / "metric_bars.png"
    plt.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    logger.info(f"✅ 指标柱状图已保存: {path}")
    return path


def _pooled(metrics: pd.DataFrame) -> Dict[str, float]:
    tp, fp, fn = (int(metrics[c].sum()) for c in ("tp", "fp", "fn"))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = float(metrics["pixel_accuracy"].mean())
    return {"tp": tp, "fp": fp, "fn": fn, "precision": precision, "recall": recall, "f": f, "pixel_accuracy": accuracy}


def text_summary(losses: Optional[pd.DataFrame], metrics: Optional[pd.DataFrame]) -> str:
    """文本汇总表"""
    lines: List[str] = []
    if losses is not None:
        lines.append("=" * 60)
        lines.append(f"📊 训练记录: {len(losses)} 行")
        if len(losses):
            last = losses.iloc[-1]
            lines.append(f"   最后一步 step={int(last['step'])}  L_D={last['loss_d']:.4f}  L_E={last['loss_e']:.4f}")
            lines.append(f"   D(real)={last['d_real_mean']:.4f}  D(fake)={last['d_fake_mean']:.4f}  "
                         f"逐像素准确率={last['pixel_accuracy']:.4f}")
    if metrics is not None:
        lines.append("=" * 60)
        lines.append(f"📊 评估帧数: {len(metrics)} 行")
        if len(metrics):
            totals = _pooled(metrics)
            lines.append(f"   TP={totals['tp']}  FP={totals['fp']}  FN={totals['fn']}")
            lines.append(f"   Prec={totals['precision'] * 100:.1f}%  Rec={totals['recall'] * 100:.1f}%  "
                         f"F={totals['f'] * 100:.1f}%  逐像素准确率(帧均值)={totals['pixel_accuracy']:.4f}")
            lines.append("")
            lines.append(metrics.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    lines.append("=" * 60)
    return "\n".join(lines) + "\n"


def build_report(loss_csv: Optional[PathLike], metrics_csv: Optional[PathLike], output_dir: PathLike) -> Dict[str, Path]:
    """
    生成报告

    Returns:
        dict: 产物名 -> 路径（零行的表不出图）
    """
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)
    losses = read_loss_csv(loss_csv) if loss_csv else None
    metrics = read_metrics_csv(metrics_csv) if metrics_csv else None

    outputs: Dict[str, Path] = {}
    if losses is not None:
        if len(losses):
            outputs["loss_curves"] = plot_loss_curves(losses, output_path)
        else:
            logger.warning("⚠️  loss CSV 没有数据行，跳过 loss 曲线")
    if metrics is not None:
        if len(metrics):
            outputs["metric_bars"] = plot_metric_bars(metrics, output_path)
        else:
            logger.warning("⚠️  指标 CSV 没有数据行，跳过柱状图")

    summary = output_path / "summary.txt"
    summary.write_text(text_summary(losses, metrics), encoding="utf-8")
    outputs["summary"] = summary
    logger.info(f"💾 文本汇总已保存: {summary}")
    return outputs
