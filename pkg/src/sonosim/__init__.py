"""Synthetic B-mode ultrasound dataset factory with lesion masks."""

from .beamsim import (
    AcousticConfig,
    RfFrame,
    envelope_detect,
    log_compress,
    pulse_waveform,
    scan_convert,
    simulate_image,
    synthesize_rf,
)
from .datagen import (
    DatasetManifest,
    FoldPlan,
    SplitPolicy,
    generate_sim_dataset,
    ingest_labeled_corpus,
    make_folds,
    subsample,
)
from .grid import BModeImage, ImageGrid, MaskImage, default_grid
from .imgops import (
    AugmentConfig,
    NetInputPair,
    augment,
    binarize_argmax,
    dice,
    mirror_pad,
    normalize01,
    prepare_pair,
    resize_bilinear,
    soft_dice_loss,
)
from .phantom import (
    LesionPolicy,
    LesionSpec,
    Phantom,
    PhantomConfig,
    apply_lesion_scaling,
    generate_phantom,
    rasterize_mask,
    sample_lesions,
)

__version__ = "0.1.0"
