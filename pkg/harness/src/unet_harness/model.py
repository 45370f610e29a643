"""U-Net builder with a spatially exact, validated shape chain.

Depth-5 encoder/decoder with unpadded 3x3 convolutions, 2x2 max
pooling, 2x2 up-sampling, and center-cropped skip connections. With a
572x572 single-channel input the output is a 388x388 two-channel
softmax map; the whole intermediate chain is computed up front and
asserted layer by layer after building.

Valid input sizes are 16*b + 124 for a bottleneck size b >= 4 (572 for
b = 28); smaller members of the family scale the network down for
CPU-sized experiments without touching depth or widths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import tensorflow as tf

from .errors import ShapeChainViolation, WeightShapeMismatch

CONTRACTION_PREFIX = "enc"


@dataclass(frozen=True)
class UNetSpec:
    input_size: int = 572
    widths: tuple[int, ...] = (64, 128, 256, 512, 1024)
    in_channels: int = 1
    out_channels: int = 2

    @property
    def depth(self) -> int:
        return len(self.widths)

    @property
    def output_size(self) -> int:
        return expected_chain(self)[-1][1]


def expected_chain(spec: UNetSpec) -> list[tuple[str, int, int]]:
    """(layer name, spatial size, channels) for every sized layer.

    Raises ShapeChainViolation when the input size cannot flow through
    unpadded convolutions and 2x2 pooling with even center crops.
    """
    chain: list[tuple[str, int, int]] = []
    size = spec.input_size
    skips: list[int] = []
    for level, width in enumerate(spec.widths[:-1], start=1):
        for j in (1, 2):
            size -= 2
            if size < 1:
                raise ShapeChainViolation(f"enc{level}_conv{j} would output size {size}")
            chain.append((f"enc{level}_conv{j}", size, width))
        skips.append(size)
        if size % 2:
            raise ShapeChainViolation(f"pool{level} input size {size} is odd")
        size //= 2
        chain.append((f"pool{level}", size, width))
    for j in (1, 2):
        size -= 2
        if size < 1:
            raise ShapeChainViolation(f"bottleneck_conv{j} would output size {size}")
        chain.append((f"bottleneck_conv{j}", size, spec.widths[-1]))
    for level, width in zip(range(spec.depth - 1, 0, -1), reversed(spec.widths[:-1])):
        size *= 2
        chain.append((f"up{level}", size, chain[-1][2]))
        skip = skips[level - 1]
        crop_total = skip - size
        if crop_total < 0 or crop_total % 2:
            raise ShapeChainViolation(
                f"crop{level}: cannot center-crop skip {skip} to {size}"
            )
        chain.append((f"crop{level}", size, width))
        chain.append((f"concat{level}", size, width + chain[-2][2]))
        for j in (1, 2):
            size -= 2
            if size < 1:
                raise ShapeChainViolation(f"dec{level}_conv{j} would output size {size}")
            chain.append((f"dec{level}_conv{j}", size, width))
    chain.append(("head", size, spec.out_channels))
    return chain


def valid_input_sizes(lo: int = 124, hi: int = 600) -> list[int]:
    sizes = []
    for s in range(lo, hi + 1):
        try:
            expected_chain(UNetSpec(input_size=s))
        except ShapeChainViolation:
            continue
        sizes.append(s)
    return sizes


def _conv_block(x, width, level_name, l2_coeff, seed):
    for j in (1, 2):
        x = tf.keras.layers.Conv2D(
            width,
            3,
            padding="valid",
            activation="relu",
            kernel_initializer=tf.keras.initializers.HeNormal(seed=seed + j),
            kernel_regularizer=tf.keras.regularizers.l2(l2_coeff),
            name=f"{level_name}_conv{j}",
        )(x)
    return x


def build_unet(spec: UNetSpec, init_seed: int = 0, l2_coeff: float = 1e-4) -> tf.keras.Model:
    """Build the network and assert its shape chain layer by layer."""
    chain = expected_chain(spec)  # validates spec before any graph work

    inputs = tf.keras.Input((spec.input_size, spec.input_size, spec.in_channels))
    x = inputs
    skips = []
    seed = init_seed
    for level, width in enumerate(spec.widths[:-1], start=1):
        x = _conv_block(x, width, f"enc{level}", l2_coeff, seed)
        seed += 10
        skips.append(x)
        x = tf.keras.layers.MaxPooling2D(2, name=f"pool{level}")(x)
    x = _conv_block(x, spec.widths[-1], "bottleneck", l2_coeff, seed)
    seed += 10
    for level, width in zip(range(spec.depth - 1, 0, -1), reversed(spec.widths[:-1])):
        x = tf.keras.layers.UpSampling2D(2, name=f"up{level}")(x)
        skip = skips[level - 1]
        crop = (skip.shape[1] - x.shape[1]) // 2
        skip = tf.keras.layers.Cropping2D(crop, name=f"crop{level}")(skip)
        x = tf.keras.layers.Concatenate(name=f"concat{level}")([skip, x])
        x = _conv_block(x, width, f"dec{level}", l2_coeff, seed)
        seed += 10
    outputs = tf.keras.layers.Conv2D(
        spec.out_channels,
        1,
        activation="softmax",
        kernel_initializer=tf.keras.initializers.HeNormal(seed=seed),
        name="head",
    )(x)
    model = tf.keras.Model(inputs, outputs, name=f"unet{spec.input_size}")

    for name, size, channels in chain:
        got = model.get_layer(name).output.shape
        if (got[1], got[2], got[3]) != (size, size, channels):
            raise ShapeChainViolation(
                f"layer {name}: expected {size}x{size}x{channels}, got "
                f"{got[1]}x{got[2]}x{got[3]}"
            )
    return model


def set_finetune_scope(model: tf.keras.Model, scope: str) -> list[str]:
    """Freeze everything outside the scope; returns the frozen layer names.

    scope="contraction" trains only the encoder blocks (bottleneck,
    decoder, and head stay fixed); scope="all" trains everything.
    """
    if scope not in ("contraction", "all"):
        raise ValueError(f"unknown finetune scope {scope!r}")
    frozen = []
    for layer in model.layers:
        if scope == "all":
            layer.trainable = True
            continue
        trainable = layer.name.startswith(CONTRACTION_PREFIX)
        layer.trainable = trainable
        if not trainable and layer.weights:
            frozen.append(layer.name)
    return frozen


def load_weights_into(model: tf.keras.Model, weights: list[np.ndarray]) -> None:
    """Set model weights from a flat list, validating shapes first."""
    current = model.get_weights()
    if len(current) != len(weights):
        raise WeightShapeMismatch(
            f"expected {len(current)} weight arrays, got {len(weights)}"
        )
    for i, (a, b) in enumerate(zip(current, weights)):
        if a.shape != np.asarray(b).shape:
            raise WeightShapeMismatch(
                f"weight {i}: model expects {a.shape}, got {np.asarray(b).shape}"
            )
    model.set_weights(weights)
