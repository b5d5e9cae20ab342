#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
日志模块

环境变量:
    RIBCAGE_SEG_LOG_LEVEL -> DEBUG / INFO / WARNING / ERROR (默认 INFO)
"""
import logging
import os
import sys

_ROOT = "ribcage_seg"
_configured = False


def _configure() -> None:
    global _configured
    if _configured:
        return
    level_name = os.getenv("RIBCAGE_SEG_LOG_LEVEL", "INFO").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.INFO

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s | %(levelname)-7s | %(message)s", "%H:%M:%S"))

    root = logging.getLogger(_ROOT)
    root.setLevel(level)
    root.addHandler(handler)
    root.propagate = False
    _configured = True


def get_logger(name: str = _ROOT) -> logging.Logger:
    """
    获取包内 logger

    Args:
        name: 模块名（通常传 __name__）

    Returns:
        logging.Logger
    """
    _configure()
    if not name.startswith(_ROOT):
        name = f"{_ROOT}.{name}"
    return logging.getLogger(name)
