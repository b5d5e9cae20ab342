#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""共享 fixture：小尺寸合成数据与训练配置"""
import numpy as np
import pytest

from ribcage_seg.data import SynthConfig, synth_generate
from ribcage_seg.trainer import TrainConfig


@pytest.fixture(scope="session")
def small_synth():
    return SynthConfig(height=64, width=64, min_cells=2, max_cells=3,
                       radius_min=5.0, radius_max=7.0, adjacent_fraction=1.0)


@pytest.fixture(scope="session")
def samples(small_synth):
    return [synth_generate(small_synth, seed) for seed in range(3)]


@pytest.fixture
def tiny_config():
    """16×16 裁剪，几步就能跑完"""
    return TrainConfig(n_train=2, batch_size=4, total_steps=4, crop_size=16, seed=5,
                       checkpoint_interval=2, log_interval=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
