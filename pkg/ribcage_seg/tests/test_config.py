#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""配置读取、命令行覆盖与类型转换"""
from typing import List

import pytest

from ribcage_seg.config import (
    SweepConfig,
    SynthRunConfig,
    TrainRunConfig,
    build_config,
    coerce,
    load_config,
    parse_overrides,
)
from ribcage_seg.errors import ConfigError


def test_parse_overrides_forms():
    assert parse_overrides(["--total-steps", "10", "--mode=cross_entropy"]) == {
        "total_steps": "10", "mode": "cross_entropy"}
    with pytest.raises(ConfigError):
        parse_overrides(["--seed"])
    with pytest.raises(ConfigError):
        parse_overrides(["seed", "1"])


@pytest.mark.parametrize("value,kind,expected", [
    ("3", int, 3),
    (4.0, int, 4),
    ("1e-4", float, 1e-4),
    ("yes", bool, True),
    ("off", bool, False),
    (None, str, ""),
    ("1, 2,4", List[int], [1, 2, 4]),
    ([1, 2], List[int], [1, 2]),
])
def test_coerce(value, kind, expected):
    assert coerce(value, kind, "k") == expected


@pytest.mark.parametrize("value,kind", [("abc", int), (2.5, int), (True, int), ("maybe", bool), ("x", float)])
def test_coerce_rejects(value, kind):
    with pytest.raises(ConfigError):
        coerce(value, kind, "k")


def test_build_config_precedence():
    config = build_config("train", {"manifest": "a.txt", "total_steps": 100}, {"total_steps": "7"})
    assert isinstance(config, TrainRunConfig)
    assert config.total_steps == 7
    assert config.manifest == "a.txt"
    assert config.train_config().total_steps == 7
    assert not hasattr(config.train_config(), "manifest")


def test_build_config_rejects_unknown_key():
    with pytest.raises(ConfigError, match="learning_rate"):
        build_config("train", {"manifest": "a.txt"}, {"learning_rate": "1"})


def test_build_config_validates():
    with pytest.raises(ConfigError):
        build_config("train", {}, {})
    with pytest.raises(ConfigError):
        build_config("train", {"manifest": "a", "mode": "wgan"})
    with pytest.raises(ConfigError):
        build_config("synth", None, {"count": "-1"})
    with pytest.raises(ConfigError):
        build_config("report", None, None)
    with pytest.raises(ConfigError):
        build_config("unknown")


def test_run_configs_narrow_to_core():
    synth = build_config("synth", {"height": 96, "count": 2})
    assert isinstance(synth, SynthRunConfig)
    assert synth.synth_config().height == 96
    sweep = build_config("sweep", {"train_manifest": "t", "val_manifest": "v", "n_train_values": [2, 3]})
    assert isinstance(sweep, SweepConfig)
    core = sweep.train_config(3, "cross_entropy")
    assert (core.n_train, core.mode) == (3, "cross_entropy")
    assert sweep.n_train == 1


def test_load_config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("train:\n  total_steps: 5\nsynth:\n", encoding="utf-8")
    assert load_config(path) == {"train": {"total_steps": 5}, "synth": {}}
    assert load_config(None) == {}

    path.write_text("training:\n  total_steps: 5\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="training"):
        load_config(path)
    path.write_text("train: [1, 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_shipped_config_is_valid():
    from pathlib import Path

    sections = load_config(Path(__file__).resolve().parents[1] / "config.yaml")
    assert set(sections) <= {"synth", "train", "segment", "evaluate", "gradcheck", "report", "sweep"}
    build_config("synth", sections.get("synth"))
    build_config("gradcheck", sections.get("gradcheck"))
