"""网络模块 - 估计网络与 Rib Cage 判别网络"""
from ribcage_seg.networks.discriminator import discriminator_forward, ribcage_block_forward
from ribcage_seg.networks.estimator import estimator_forward, min_input_size
from ribcage_seg.networks.params import (
    Binder,
    DiscriminatorConfig,
    DiscriminatorParams,
    EstimatorConfig,
    EstimatorParams,
    RibCageBlockParams,
    init_params,
)

__all__ = [
    "discriminator_forward", "ribcage_block_forward", "estimator_forward", "min_input_size",
    "Binder", "DiscriminatorConfig", "DiscriminatorParams", "EstimatorConfig",
    "EstimatorParams", "RibCageBlockParams", "init_params",
]
