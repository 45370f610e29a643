"""Training, fine-tuning, and evaluation loops.

Optimization follows the segmentation recipe the manifests were built
for: Adam, soft Dice loss on the foreground channel, He-normal init,
L2 kernel regularization, ReLU/softmax activations, and on-the-fly
shift/zoom augmentation. The best-validation-DSC weights are retained.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import tensorflow as tf

from . import data, ops
from .errors import DataError
from .model import UNetSpec, build_unet, load_weights_into, set_finetune_scope

_DETERMINISM_ENABLED = False


def seed_everything(seed: int) -> None:
    """Seed python/numpy/TF and force deterministic kernels."""
    global _DETERMINISM_ENABLED
    tf.keras.utils.set_random_seed(seed)
    if not _DETERMINISM_ENABLED:
        tf.config.experimental.enable_op_determinism()
        _DETERMINISM_ENABLED = True


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    epochs: int = 150
    batch_size: int = 8
    l2_coeff: float = 1e-4
    augment: ops.AugmentConfig | None = field(default_factory=ops.AugmentConfig)
    seed: int = 0
    select_best_by_val: bool = True
    stop_at_train_dsc: float | None = None  # early exit for capacity checks


@dataclass
class History:
    epochs: list[dict] = field(default_factory=list)

    def add(self, **kwargs) -> None:
        self.epochs.append(kwargs)

    def series(self, key: str) -> list:
        return [e[key] for e in self.epochs if key in e]


def soft_dice_loss_fg(y_true: tf.Tensor, prob_fg: tf.Tensor) -> tf.Tensor:
    """Per-sample smoothed Dice loss on the foreground channel, averaged."""
    axes = tuple(range(1, len(prob_fg.shape)))
    num = 2.0 * tf.reduce_sum(prob_fg * y_true, axis=axes) + ops.SOFT_DICE_EPS
    den = (
        tf.reduce_sum(prob_fg, axis=axes)
        + tf.reduce_sum(y_true, axis=axes)
        + ops.SOFT_DICE_EPS
    )
    return tf.reduce_mean(1.0 - num / den)


def _dsc_of_batch(prob: np.ndarray, masks: np.ndarray) -> list[float]:
    binary = ops.binarize_argmax(prob)
    return [ops.dice(masks[i, ..., 0], binary[i]) for i in range(len(masks))]


def evaluate_entries(model: tf.keras.Model, entries, out_size: int) -> tuple[float, float, list[float]]:
    """Mean and population-std foreground DSC over preprocessed entries."""
    if not entries:
        raise DataError("cannot evaluate an empty entry list")
    scores = []
    for entry in entries:
        x, y = data.prepare_example(entry, out_size)
        prob = model(x[None], training=False).numpy()
        scores.extend(_dsc_of_batch(prob, y[None]))
    return float(np.mean(scores)), float(np.std(scores)), scores


def evaluate_split(model, manifest: data.Manifest, split: str, spec: UNetSpec):
    return evaluate_entries(model, manifest.split_entries(split), spec.output_size)


@dataclass
class TrainResult:
    model: tf.keras.Model
    history: History
    best_val_dsc: float | None


def train(
    model: tf.keras.Model,
    train_entries: list,
    val_entries: list,
    spec: UNetSpec,
    cfg: TrainConfig,
) -> TrainResult:
    """Soft-dice training with per-epoch train/val DSC tracking.

    Augmentation applies to training entries only. When validation
    entries are given, the best-val-DSC weights are restored at the
    end; without them the final weights stand.
    """
    if not train_entries:
        raise DataError("training split is empty")
    out_size = spec.output_size
    optimizer = tf.keras.optimizers.Adam(cfg.learning_rate)

    @tf.function(reduce_retracing=True)
    def step(x, y):
        with tf.GradientTape() as tape:
            prob_fg = model(x, training=True)[..., 1:2]
            loss = soft_dice_loss_fg(y, prob_fg)
            if model.losses:
                loss = loss + tf.add_n(model.losses)
        grads = tape.gradient(loss, model.trainable_variables)
        optimizer.apply_gradients(zip(grads, model.trainable_variables))
        return loss

    history = History()
    best_val = None
    best_weights = None
    for epoch in range(cfg.epochs):
        losses = []
        train_dscs = []
        for xb, yb in data.epoch_batches(
            train_entries, out_size, cfg.batch_size, cfg.seed, epoch, cfg.augment
        ):
            loss = step(tf.constant(xb), tf.constant(yb))
            losses.append(float(loss))
            prob = model(xb, training=False).numpy()
            train_dscs.append(float(np.mean(_dsc_of_batch(prob, yb))))
        record = {"epoch": epoch, "train_loss": float(np.mean(losses)),
                  "train_dsc": float(np.mean(train_dscs))}
        if val_entries:
            val_mean, _, _ = evaluate_entries(model, val_entries, out_size)
            record["val_dsc"] = val_mean
            if best_val is None or val_mean > best_val:
                best_val = val_mean
                best_weights = model.get_weights()
        history.add(**record)
        if cfg.stop_at_train_dsc is not None and record["train_dsc"] >= cfg.stop_at_train_dsc:
            break
    if cfg.select_best_by_val and best_weights is not None:
        model.set_weights(best_weights)
    return TrainResult(model=model, history=history, best_val_dsc=best_val)


def train_from_scratch(
    spec: UNetSpec,
    train_entries,
    val_entries,
    cfg: TrainConfig,
    init_seed: int | None = None,
) -> TrainResult:
    seed_everything(cfg.seed if init_seed is None else init_seed)
    model = build_unet(spec, init_seed=cfg.seed if init_seed is None else init_seed,
                       l2_coeff=cfg.l2_coeff)
    return train(model, train_entries, val_entries, spec, cfg)


def finetune(
    pretrained_weights: list,
    spec: UNetSpec,
    train_entries,
    val_entries,
    cfg: TrainConfig,
    scope: str = "contraction",
    init_seed: int | None = None,
) -> TrainResult:
    """Continue training from pretrained weights with a freeze scope.

    scope="contraction" updates only encoder parameters; bottleneck,
    decoder, and head stay bit-identical.
    """
    seed_everything(cfg.seed if init_seed is None else init_seed)
    model = build_unet(spec, init_seed=cfg.seed if init_seed is None else init_seed,
                       l2_coeff=cfg.l2_coeff)
    load_weights_into(model, pretrained_weights)
    set_finetune_scope(model, scope)
    return train(model, train_entries, val_entries, spec, cfg)


# ------------------------------------------------------------------ checkpoints


def save_checkpoint(model, path, spec: UNetSpec, cfg: TrainConfig, extra: dict | None = None):
    """Weights in native Keras format plus a sidecar JSON of the recipe."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    model.save_weights(path)
    sidecar = {
        "unet_spec": {
            "input_size": spec.input_size,
            "widths": list(spec.widths),
            "in_channels": spec.in_channels,
            "out_channels": spec.out_channels,
        },
        "train_config": {
            "learning_rate": cfg.learning_rate,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "l2_coeff": cfg.l2_coeff,
            "seed": cfg.seed,
            "augment": None
            if cfg.augment is None
            else {
                "max_shift_fraction": cfg.augment.max_shift_fraction,
                "zoom_range": list(cfg.augment.zoom_range),
            },
        },
    }
    if extra:
        sidecar.update(extra)
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True, indent=2) + "\n")


def load_checkpoint(path) -> tuple[tf.keras.Model, UNetSpec, dict]:
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    raw = sidecar["unet_spec"]
    spec = UNetSpec(
        input_size=raw["input_size"],
        widths=tuple(raw["widths"]),
        in_channels=raw["in_channels"],
        out_channels=raw["out_channels"],
    )
    model = build_unet(spec, l2_coeff=sidecar["train_config"]["l2_coeff"])
    model.load_weights(path)
    return model, spec, sidecar
