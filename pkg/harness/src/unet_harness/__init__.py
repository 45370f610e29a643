"""U-Net segmentation transfer-learning workbench over dataset manifests."""

from .avenues import AvenueReport, AvenueSpec, run_avenue
from .data import Manifest, deal_folds, load_manifest
from .errors import DataError, HarnessError, ShapeChainViolation, WeightShapeMismatch
from .model import (
    UNetSpec,
    build_unet,
    expected_chain,
    set_finetune_scope,
    valid_input_sizes,
)
from .train import (
    TrainConfig,
    evaluate_entries,
    evaluate_split,
    finetune,
    load_checkpoint,
    save_checkpoint,
    seed_everything,
    soft_dice_loss_fg,
    train,
    train_from_scratch,
)

__version__ = "0.1.0"
