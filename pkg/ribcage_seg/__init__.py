"""
Rib Cage 对抗式细胞分割

自带最小反向自动微分核心的显微镜细胞核分割引擎：
估计网络 + Rib Cage 判别网络的 min-max 对抗训练、合成显微数据、实例级评估
"""

__version__ = "1.0.0"
__author__ = "Rib Cage Seg Team"
