#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""估计网络与 Rib Cage 判别网络"""
import numpy as np
import pytest

from ribcage_seg.errors import ConfigError, ShapeError
from ribcage_seg.networks import (
    Binder,
    DiscriminatorConfig,
    EstimatorConfig,
    discriminator_forward,
    estimator_forward,
    init_params,
    ribcage_block_forward,
)
from ribcage_seg.networks.layers import conv_block_forward
from ribcage_seg.tensor import Graph, backward, concat_channels, constant, flatten, mean


def one_hot_batch(rng, batch, size):
    classes = rng.integers(0, 3, size=(batch, size, size))
    return np.eye(3)[classes]


@pytest.fixture(scope="module")
def estimator():
    return init_params(0, EstimatorConfig())


@pytest.fixture(scope="module")
def discriminator():
    return init_params(1, DiscriminatorConfig(input_size=32))


def test_estimator_parameter_count(estimator):
    assert estimator.parameter_count() == 143843


@pytest.mark.parametrize("shape", [(2, 16, 16), (1, 64, 64), (1, 100, 77)])
def test_estimator_output_is_probability_map(estimator, shape):
    rng = np.random.default_rng(0)
    image = constant(rng.standard_normal(shape + (1,)))
    out = estimator_forward(estimator, image, track_stats=False).value
    assert out.shape == shape + (3,)
    assert np.all(out >= 0) and np.all(out <= 1)
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-9)


def test_estimator_rejects_small_input(estimator):
    with pytest.raises(ShapeError):
        estimator_forward(estimator, constant(np.zeros((2, 8, 8, 1))))


def test_estimator_track_stats_flag():
    params = init_params(3, EstimatorConfig())
    image = constant(np.random.default_rng(3).standard_normal((2, 16, 16, 1)))
    estimator_forward(params, image, track_stats=False)
    assert all(s.num_batches == 0 for s in params.named_buffers().values())
    estimator_forward(params, image)
    assert all(s.num_batches == 1 for s in params.named_buffers().values())


def test_ribcage_block_shapes(discriminator):
    rng = np.random.default_rng(0)
    gl = constant(rng.standard_normal((2, 32, 32, 1)))
    seg = constant(one_hot_batch(rng, 2, 32))
    gl_out, seg_out, spine_out = ribcage_block_forward(discriminator.blocks[0], gl, seg, track_stats=False)
    assert gl_out.shape == (2, 16, 16, 16)
    assert seg_out.shape == (2, 16, 16, 16)
    assert spine_out.shape == (2, 16, 16, 8)


def test_discriminator_output_range(discriminator):
    rng = np.random.default_rng(1)
    out = discriminator_forward(discriminator, constant(rng.standard_normal((4, 32, 32, 1))),
                                constant(one_hot_batch(rng, 4, 32)), track_stats=False).value
    assert out.shape == (4, 1)
    assert np.all((out > 0) & (out < 1))


def test_discriminator_rejects_wrong_size(discriminator):
    rng = np.random.default_rng(2)
    with pytest.raises(ShapeError):
        discriminator_forward(discriminator, constant(rng.standard_normal((2, 48, 48, 1))),
                              constant(one_hot_batch(rng, 2, 48)))


def test_discriminator_input_size_multiple_of_16():
    with pytest.raises(ConfigError):
        init_params(0, DiscriminatorConfig(input_size=40))


def test_init_is_deterministic():
    a = init_params(7, DiscriminatorConfig(input_size=16)).named_parameters()
    b = init_params(7, DiscriminatorConfig(input_size=16)).named_parameters()
    c = init_params(8, DiscriminatorConfig(input_size=16)).named_parameters()
    assert list(a) == list(b)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert any(not np.array_equal(a[k], c[k]) for k in a)


def test_he_initialization_scale(estimator):
    kernel = estimator.named_parameters()["layer2.conv.kernel"]
    expected = np.sqrt(2.0 / (7 * 7 * 16))
    assert kernel.std() == pytest.approx(expected, rel=0.2)


def test_gradients_reach_every_parameter():
    params = init_params(4, DiscriminatorConfig(input_size=16))
    rng = np.random.default_rng(4)
    graph = Graph()
    bind = Binder(graph)
    out = discriminator_forward(params, constant(rng.standard_normal((4, 16, 16, 1))),
                                constant(one_hot_batch(rng, 4, 16)), bind=bind, track_stats=False)
    named = params.named_parameters()
    grads = bind.gradients(backward(graph, mean(out)), named)
    assert set(grads) == set(named)
    assert all(grads[k].shape == named[k].shape for k in named)


@pytest.mark.parametrize("index, widths", [(0, (1, 3, 0)), (1, (16, 16, 8))])
def test_ribcage_block_zero_inputs_give_zero_outputs(discriminator, index, widths):
    gl, seg, spine = (constant(np.zeros((2, 16, 16, w))) if w else None for w in widths)
    outputs = ribcage_block_forward(discriminator.blocks[index], gl, seg, spine, track_stats=False)
    for out in outputs:
        # 常数输入经 BN 后为 beta = 0，再过 leaky-ReLU 仍为 0，空间上处处相同
        assert np.all(out.value == 0.0)


def test_discriminator_64_trace():
    params = init_params(2, DiscriminatorConfig(input_size=64))
    rng = np.random.default_rng(5)
    gl = constant(rng.standard_normal((2, 64, 64, 1)))
    sg = constant(one_hot_batch(rng, 2, 64))
    spine = None
    sizes = []
    for block in params.blocks:
        gl, sg, spine = ribcage_block_forward(block, gl, sg, spine, track_stats=False)
        sizes.append(spine.shape[1])
    fused = conv_block_forward(params.fusion, concat_channels(gl, sg, spine), 2, "train", 0.2, Binder(), False)
    assert sizes == [32, 16, 8]
    assert fused.shape == (2, 4, 4, 64)
    assert flatten(fused).shape == (2, 1024)
    assert params.named_parameters()["fc1.weights"].shape == (1024, 64)
    out = discriminator_forward(params, constant(rng.standard_normal((2, 64, 64, 1))),
                                constant(one_hot_batch(rng, 2, 64)), track_stats=False)
    assert out.shape == (2, 1)


def test_discriminator_distinguishes_segmentations(discriminator):
    rng = np.random.default_rng(6)
    image = constant(rng.standard_normal((2, 32, 32, 1)))
    real = one_hot_batch(rng, 2, 32)
    logits = rng.standard_normal((2, 32, 32, 3))
    fake = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
    d_real = discriminator_forward(discriminator, image, constant(real), track_stats=False).value
    d_fake = discriminator_forward(discriminator, image, constant(fake), track_stats=False).value
    assert not np.allclose(d_real, d_fake)
