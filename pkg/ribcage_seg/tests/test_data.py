#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""RGB 编码、合成数据、增强与文件读写"""
import numpy as np
import pytest
from PIL import Image
from scipy import ndimage

from ribcage_seg.data import (
    PALETTE,
    AugmentParams,
    SynthConfig,
    apply_augment,
    augment,
    decode_rgb,
    encode_rgb,
    load_dataset,
    load_image,
    load_label,
    read_manifest,
    save_image,
    save_label,
    synth_generate,
    write_manifest,
)
from ribcage_seg.errors import ConfigError, DataError, ImageFormatError, LabelCodecError, SynthesisError
from ribcage_seg.evaluation import TOUCHING_GAP, extract_instances, touching_pairs
from ribcage_seg.models import LabeledSample, SegmentationMap


def random_label(rng, shape=(12, 9)):
    return SegmentationMap(rng.integers(0, 3, size=shape))


# ==================== RGB 编码 ====================

def test_palette_colors():
    label = SegmentationMap(np.array([[0, 1, 2]]))
    np.testing.assert_array_equal(encode_rgb(label)[0], [[255, 0, 0], [0, 255, 0], [0, 0, 255]])


def test_codec_round_trip(rng):
    label = random_label(rng)
    assert decode_rgb(encode_rgb(label)) == label


def test_decode_reports_first_bad_pixel():
    rgb = np.tile(PALETTE[0], (3, 4, 1))
    rgb[1, 2] = [10, 20, 30]
    rgb[2, 0] = [1, 1, 1]
    with pytest.raises(LabelCodecError, match=r"row=1, col=2"):
        decode_rgb(rgb)


def test_decode_rejects_wrong_shape():
    with pytest.raises(LabelCodecError):
        decode_rgb(np.zeros((4, 4), dtype=np.uint8))


# ==================== 合成数据 ====================

def test_synth_is_deterministic(small_synth):
    a = synth_generate(small_synth, 11)
    b = synth_generate(small_synth, 11)
    c = synth_generate(small_synth, 12)
    np.testing.assert_array_equal(a.image, b.image)
    assert a.label == b.label
    assert not np.array_equal(a.image, c.image)


@pytest.mark.parametrize("seed", range(5))
def test_synth_cells_are_separate_instances(small_synth, seed):
    sample = synth_generate(small_synth, seed)
    assert sample.image.shape == sample.label.shape == (64, 64)
    instances = extract_instances(sample.label)
    assert small_synth.min_cells <= instances.count <= small_synth.max_cells
    # 相贴的一对细胞在 "非背景" 区域里连成一块，只靠轮廓类分开
    _, blobs = ndimage.label(sample.label.classes != 0, structure=ndimage.generate_binary_structure(2, 1))
    assert blobs < instances.count


def test_synth_without_pairs_keeps_cells_apart(small_synth):
    config = SynthConfig(height=64, width=64, min_cells=3, max_cells=3, radius_min=4.0, radius_max=5.0,
                         adjacent_fraction=0.0)
    sample = synth_generate(config, 3)
    _, blobs = ndimage.label(sample.label.classes != 0, structure=ndimage.generate_binary_structure(2, 1))
    assert blobs == extract_instances(sample.label).count == 3


@pytest.mark.parametrize("seed", range(10))
def test_synth_designed_pairs_are_the_touching_pairs(seed):
    config = SynthConfig()
    sample = synth_generate(config, seed)
    found = touching_pairs(extract_instances(sample.label), config.touch_gap)
    assert sample.touching == found
    assert config.touch_gap == TOUCHING_GAP


@pytest.mark.parametrize("seed", range(5))
def test_synth_small_frames_report_touching_pairs(small_synth, seed):
    sample = synth_generate(small_synth, seed)
    assert len(sample.touching) == 1
    assert sample.touching == touching_pairs(extract_instances(sample.label), small_synth.touch_gap)


@pytest.mark.parametrize("seed", range(5))
def test_synth_nuclei_keep_contour_ring(small_synth, seed):
    instances = extract_instances(synth_generate(small_synth, seed).label)
    square = ndimage.generate_binary_structure(2, 2)
    for inst in range(1, instances.count + 1):
        grown = ndimage.binary_dilation(instances.ids == inst, structure=square)
        assert set(np.unique(instances.ids[grown])) <= {0, inst}


def test_synth_zero_cells():
    config = SynthConfig(height=64, width=64, min_cells=0, max_cells=0)
    sample = synth_generate(config, 0)
    assert np.all(sample.label.classes == 0)


def test_synth_too_dense_raises():
    config = SynthConfig(height=64, width=64, min_cells=40, max_cells=40, radius_min=9.0, radius_max=11.0,
                         max_retries=20)
    with pytest.raises(SynthesisError):
        synth_generate(config, 0)


def test_synth_config_validation():
    with pytest.raises(ConfigError):
        synth_generate(SynthConfig(height=32, width=32), 0)
    with pytest.raises(ConfigError):
        synth_generate(SynthConfig(radius_min=8.0, radius_max=4.0), 0)


# ==================== 增强 ====================

def test_augment_crop_shape_and_alignment(samples):
    crop = augment(samples[0], 16, seed=3)
    assert crop.image.shape == crop.label.shape == (16, 16)
    again = augment(samples[0], 16, seed=3)
    np.testing.assert_array_equal(crop.image, again.image)


def test_identity_augment_is_a_plain_crop(rng):
    sample = LabeledSample(rng.random((10, 10)), random_label(rng, (10, 10)))
    out = apply_augment(sample, AugmentParams(top=2, left=3, size=5))
    np.testing.assert_array_equal(out.image, sample.image[2:7, 3:8])
    np.testing.assert_array_equal(out.label.classes, sample.label.classes[2:7, 3:8])


def test_image_and_label_move_together(rng):
    image = rng.random((8, 8))
    # 标签由图像阈值得到，变换后仍应一致
    sample = LabeledSample(image, SegmentationMap((image > 0.5).astype(np.uint8)))
    out = apply_augment(sample, AugmentParams(0, 0, 8, True, True, 3))
    np.testing.assert_array_equal(out.label.classes, (out.image > 0.5).astype(np.uint8))


def test_double_flip_is_identity(rng):
    sample = LabeledSample(rng.random((6, 6)), random_label(rng, (6, 6)))
    once = apply_augment(sample, AugmentParams(0, 0, 6, flip_horizontal=True))
    twice = apply_augment(once, AugmentParams(0, 0, 6, flip_horizontal=True))
    np.testing.assert_array_equal(twice.image, sample.image)


def test_half_turn_twice_is_identity(rng):
    sample = LabeledSample(rng.random((7, 7)), random_label(rng, (7, 7)))
    half_turn = AugmentParams(0, 0, 7, rotations=2)
    twice = apply_augment(apply_augment(sample, half_turn), half_turn)
    np.testing.assert_array_equal(twice.image, sample.image)
    assert twice.label == sample.label


@pytest.mark.parametrize("flip_h, flip_v, rotations", [(True, False, 0), (False, True, 1), (True, True, 3),
                                                       (False, False, 2)])
def test_flips_and_rotations_keep_class_histogram(rng, flip_h, flip_v, rotations):
    sample = LabeledSample(rng.random((9, 9)), random_label(rng, (9, 9)))
    out = apply_augment(sample, AugmentParams(0, 0, 9, flip_h, flip_v, rotations))
    np.testing.assert_array_equal(out.label.histogram(), sample.label.histogram())
    np.testing.assert_allclose(np.sort(out.image.ravel()), np.sort(sample.image.ravel()))


def test_augment_rejects_small_sample(rng):
    sample = LabeledSample(rng.random((8, 8)), random_label(rng, (8, 8)))
    with pytest.raises(DataError):
        augment(sample, 16, seed=0)


# ==================== 文件读写 ====================

def test_image_round_trip_keeps_range(tmp_path, rng):
    image = 0.2 + 0.5 * rng.random((20, 30))
    save_image(tmp_path / "img.png", image)
    loaded = load_image(tmp_path / "img.png")
    assert loaded.shape == (20, 30)
    np.testing.assert_allclose(loaded, image, atol=0.5 / 255 + 1e-12)


def test_plain_grayscale_maps_to_unit_range(tmp_path):
    Image.fromarray(np.array([[0, 255]], dtype=np.uint8)).save(tmp_path / "plain.png")
    np.testing.assert_array_equal(load_image(tmp_path / "plain.png"), [[0.0, 1.0]])


def test_label_round_trip(tmp_path, rng):
    label = random_label(rng)
    save_label(tmp_path / "lbl.png", label)
    assert load_label(tmp_path / "lbl.png") == label


def test_io_errors(tmp_path):
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "missing.png")
    (tmp_path / "junk.png").write_bytes(b"junk")
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "junk.png")
    Image.fromarray(np.zeros((2, 2, 3), dtype=np.uint8)).save(tmp_path / "rgb.png")
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "rgb.png")
    Image.fromarray(np.zeros((2, 2), dtype=np.uint8)).save(tmp_path / "gray.png")
    with pytest.raises(ImageFormatError):
        load_label(tmp_path / "gray.png")


def test_manifest_round_trip(tmp_path, samples):
    pairs = []
    for i, sample in enumerate(samples):
        save_image(tmp_path / "images" / f"{i}.png", sample.image)
        save_label(tmp_path / "labels" / f"{i}.png", sample.label)
        pairs.append((f"images/{i}.png", f"labels/{i}.png"))
    write_manifest(tmp_path / "manifest.txt", pairs)

    entries = read_manifest(tmp_path / "manifest.txt")
    assert entries[0] == (tmp_path / "images" / "0.png", tmp_path / "labels" / "0.png")
    loaded = load_dataset(tmp_path / "manifest.txt")
    assert len(loaded) == len(samples)
    assert all(a.label == b.label for a, b in zip(loaded, samples))


def test_manifest_bad_line(tmp_path):
    (tmp_path / "m.txt").write_text("a.png\tb.png\nonly-one-column\n", encoding="utf-8")
    with pytest.raises(DataError, match="第 2 行"):
        read_manifest(tmp_path / "m.txt")
    with pytest.raises(DataError):
        read_manifest(tmp_path / "nope.txt")
