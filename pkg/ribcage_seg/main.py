#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Rib Cage 对抗式细胞分割 - 主程序

使用方式:
    python -m ribcage_seg <command> [--config config.yaml] [--key value ...]

命令:
    synth      生成合成显微数据集
    train      对抗训练（或 mode=cross_entropy 的交叉熵对照）
    segment    用检查点对图像做整帧分割
    evaluate   实例级评估
    gradcheck  梯度检查套件
    report     loss 曲线 / 指标图 / 文本汇总
    sweep      不同 N_Train 的对比实验

退出码:
    0 成功，1 梯度检查未通过，2 配置或输入错误，3 训练发散 (NaN)

环境变量（可选）:
    RIBCAGE_SEG_LOG_LEVEL    -> 日志级别 DEBUG / INFO / WARNING / ERROR
"""
import argparse
import sys
from typing import List, Optional

# 检查依赖
try:
    import matplotlib
    import numpy as np
    import pandas as pd
    import scipy
    import yaml
    from PIL import Image
except ImportError as e:
    error_msg = (
        f"\n❌ 缺少必要的依赖包: {e}\n\n"
        f"💡 解决方案：\n"
        f"1. 激活虚拟环境：\n"
        f"   source venv/bin/activate\n"
        f"2. 安装依赖：\n"
        f"   pip install -r requirements.txt\n"
        f"3. 然后重新运行\n"
    )
    print(error_msg)
    sys.exit(2)

from ribcage_seg.commands import COMMANDS
from ribcage_seg.config import build_config, load_config, parse_overrides
from ribcage_seg.errors import GradcheckFailed, NonFiniteError, RibcageSegError, TrainingDiverged
from ribcage_seg.log import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ribcage_seg",
        description="Rib Cage 对抗式细胞分割",
        epilog="其余 --key value 参数覆盖配置文件中对应命令节的同名配置项",
    )
    parser.add_argument("command", choices=list(COMMANDS), help="要执行的命令")
    parser.add_argument("--config", default=None, help="YAML 配置文件路径")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    命令行入口

    Args:
        argv: 参数列表，默认取 sys.argv[1:]

    Returns:
        int: 退出码
    """
    args, rest = build_parser().parse_known_args(argv)
    try:
        sections = load_config(args.config)
        config = build_config(args.command, sections.get(args.command), parse_overrides(rest))
        logger.debug(f"⚙️  {args.command} 配置: {config}")
        COMMANDS[args.command](config)
    except GradcheckFailed as e:
        logger.error(f"❌ {e}")
        return EXIT_VERIFY
    except (TrainingDiverged, NonFiniteError) as e:
        logger.error(f"❌ 运行中止: {e}")
        dump = getattr(e, "dump_path", None)
        if dump:
            logger.error(f"   诊断文件: {dump}")
        return EXIT_DIVERGED
    except RibcageSegError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
