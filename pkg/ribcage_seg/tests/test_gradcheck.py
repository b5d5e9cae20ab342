#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""梯度检查套件"""
import pandas as pd
import pytest

from ribcage_seg.commands import cmd_gradcheck
from ribcage_seg.config import GradcheckConfig
from ribcage_seg.errors import ConfigError, GradcheckFailed
from ribcage_seg.verify import NETWORK_TOLERANCE, OP_TOLERANCE, build_cases, gradcheck_suite

OPS = [
    "conv2d", "conv2d_stride2", "batchnorm", "batchnorm_infer", "leaky_relu", "sigmoid",
    "softmax_channels", "log", "clip", "fully_connected", "concat_channels", "crop",
    "reshape", "flatten", "mean", "sum_channels", "add", "sub", "mul", "neg", "scale",
]


def test_every_op_has_a_case():
    names = [p.name for p in build_cases(0)]
    assert names == OPS + ["estimator", "discriminator"]
    assert [p.name for p in build_cases(0, include_networks=False)] == OPS


def test_op_cases_pass():
    results = gradcheck_suite(seed=0, include_networks=False)
    failed = [(r.name, r.error) for r in results if not r.passed]
    assert failed == []
    assert all(r.tolerance == OP_TOLERANCE for r in results)


@pytest.mark.parametrize("seed", range(20))
def test_op_cases_pass_for_many_seeds(seed):
    results = gradcheck_suite(seed=seed, include_networks=False)
    assert [r.name for r in results] == OPS
    assert [(r.name, r.error) for r in results if r.error >= 1e-5] == []


@pytest.mark.parametrize("name", ["estimator", "discriminator"])
def test_network_cases_pass(name):
    (result,) = gradcheck_suite(seed=0, only=[name])
    assert result.tolerance == NETWORK_TOLERANCE
    assert result.passed, result.error


@pytest.mark.parametrize("name", ["conv2d", "batchnorm", "softmax_channels", "estimator"])
def test_injected_fault_is_caught(name):
    (result,) = gradcheck_suite(seed=0, fault=name, only=[name])
    assert result.name == f"{name}[fault]"
    assert not result.passed
    assert result.error == pytest.approx(0.1 / 1.1, rel=0.05)


def test_unknown_case_name():
    with pytest.raises(ConfigError):
        gradcheck_suite(only=["nonexistent"])
    with pytest.raises(ConfigError):
        gradcheck_suite(fault="nonexistent", include_networks=False)


def test_cmd_gradcheck_writes_table(tmp_path, capsys):
    output = tmp_path / "grad.csv"
    table = cmd_gradcheck(GradcheckConfig(include_networks=False, only=["sigmoid", "mul"], output=str(output)))
    assert list(table["op"]) == ["sigmoid", "mul"]
    saved = pd.read_csv(output)
    assert list(saved.columns) == ["op", "max_rel_error", "tolerance", "passed"]
    assert saved["passed"].all()
    assert "sigmoid" in capsys.readouterr().out


def test_cmd_gradcheck_raises_on_failure():
    with pytest.raises(GradcheckFailed, match="log"):
        cmd_gradcheck(GradcheckConfig(include_networks=False, only=["log"], fault="log"))
