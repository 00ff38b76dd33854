from .bundle import bundle_hash, load_bundle, save_bundle
from .losses import adversarial_loss, cycle_loss, gradient_penalty, total_loss
from .nets import Critic, Generator
from .training import (
    GanTrainConfig,
    LossRecord,
    TransferError,
    TransferModelBundle,
    init_bundle,
    train_transfer,
    transfer_to_target,
)

__all__ = [
    "Critic",
    "GanTrainConfig",
    "Generator",
    "LossRecord",
    "TransferError",
    "TransferModelBundle",
    "adversarial_loss",
    "bundle_hash",
    "cycle_loss",
    "gradient_penalty",
    "init_bundle",
    "load_bundle",
    "save_bundle",
    "total_loss",
    "train_transfer",
    "transfer_to_target",
]
