"""数据模块 - 合成样本、RGB 标签编码、数据增强、文件读写"""
from ribcage_seg.data.augment import AugmentParams, apply_augment, augment, draw_augment_params
from ribcage_seg.data.codec import PALETTE, decode_rgb, encode_rgb
from ribcage_seg.data.io import (
    load_dataset,
    load_image,
    load_label,
    read_manifest,
    save_image,
    save_label,
    write_manifest,
)
from ribcage_seg.data.synth import SynthConfig, synth_generate

__all__ = [
    "AugmentParams", "apply_augment", "augment", "draw_augment_params",
    "PALETTE", "decode_rgb", "encode_rgb",
    "load_dataset", "load_image", "load_label", "read_manifest", "save_image",
    "save_label", "write_manifest",
    "SynthConfig", "synth_generate",
]
