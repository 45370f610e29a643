"""Image-space operations shared by generation, training, and evaluation.

The network contract is fixed: images are resized to 388x388, mirror
padded by 92 pixels to 572x572, and normalized to [0, 1]; masks travel
at the network output size of 388x388 with values in {0, 1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyInput, PadTooLarge, ShapeMismatch

NET_OUTPUT_SIZE = 388
MIRROR_PAD = 92
NET_INPUT_SIZE = NET_OUTPUT_SIZE + 2 * MIRROR_PAD  # 572

SOFT_DICE_EPS = 1.0


@dataclass(frozen=True)
class AugmentConfig:
    """Shift/zoom ranges for on-the-fly training augmentation."""

    max_shift_fraction: float = 0.10
    zoom_range: tuple[float, float] = (0.9, 1.1)

    def __post_init__(self):
        if not 0.0 <= self.max_shift_fraction < 0.5:
            raise ValueError("max_shift_fraction must lie in [0, 0.5)")
        if self.zoom_range[0] <= 0 or self.zoom_range[0] > self.zoom_range[1]:
            raise ValueError("zoom_range must be positive and ordered")


@dataclass
class NetInputPair:
    """Preprocessed network input image and (optionally) its target mask."""

    image: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        if self.image.shape != (NET_INPUT_SIZE, NET_INPUT_SIZE):
            raise ShapeMismatch(
                f"image must be {NET_INPUT_SIZE}x{NET_INPUT_SIZE}, got {self.image.shape}"
            )
        if self.mask is not None:
            if self.mask.shape != (NET_OUTPUT_SIZE, NET_OUTPUT_SIZE):
                raise ShapeMismatch(
                    f"mask must be {NET_OUTPUT_SIZE}x{NET_OUTPUT_SIZE}, got {self.mask.shape}"
                )
            if not np.isin(self.mask, (0, 1)).all():
                raise ValueError("mask values must be 0 or 1")


def _axis_coords(n_out: int, n_in: int) -> np.ndarray:
    # Corner-aligned sampling: output corners map onto input corners.
    if n_out == 1:
        return np.zeros(1)
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize to (out_h, out_w)."""
    img = np.asarray(img, dtype=float)
    if img.size == 0:
        raise EmptyInput("cannot resize an empty image")
    h, w = img.shape
    r = _axis_coords(out_h, h)
    c = _axis_coords(out_w, w)
    r0 = np.minimum(np.floor(r).astype(np.int64), max(h - 2, 0))
    c0 = np.minimum(np.floor(c).astype(np.int64), max(w - 2, 0))
    rf = r - r0
    cf = c - c0
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    top = img[r0[:, None], c0[None, :]] * (1 - cf) + img[r0[:, None], c1[None, :]] * cf
    bot = img[r1[:, None], c0[None, :]] * (1 - cf) + img[r1[:, None], c1[None, :]] * cf
    return top * (1 - rf[:, None]) + bot * rf[:, None]


def resize_nearest(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned nearest-neighbor resize; used for masks."""
    img = np.asarray(img)
    if img.size == 0:
        raise EmptyInput("cannot resize an empty image")
    h, w = img.shape
    r = np.clip(np.rint(_axis_coords(out_h, h)).astype(np.int64), 0, h - 1)
    c = np.clip(np.rint(_axis_coords(out_w, w)).astype(np.int64), 0, w - 1)
    return img[r[:, None], c[None, :]]


def mirror_pad(img: np.ndarray, pad: int) -> np.ndarray:
    """Reflection padding that does not repeat the border pixel."""
    img = np.asarray(img)
    if pad < 0:
        raise ValueError("pad must be nonnegative")
    if pad >= min(img.shape):
        raise PadTooLarge(f"pad {pad} too large for shape {img.shape}")
    return np.pad(img, pad, mode="reflect")


def normalize01(img: np.ndarray) -> np.ndarray:
    """Min-max normalize to [0, 1]; a constant image maps to all zeros."""
    img = np.asarray(img, dtype=float)
    lo = img.min()
    hi = img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def prepare_image(img: np.ndarray, normalization: str = "minmax") -> np.ndarray:
    """Arbitrary grayscale image -> 572x572 network input in [0, 1].

    ``normalization="fixed255"`` divides by 255 instead of per-image
    min-max scaling.
    """
    resized = resize_bilinear(img, NET_OUTPUT_SIZE, NET_OUTPUT_SIZE)
    padded = mirror_pad(resized, MIRROR_PAD)
    if normalization == "minmax":
        return normalize01(padded)
    if normalization == "fixed255":
        return np.clip(padded / 255.0, 0.0, 1.0)
    raise ValueError(f"unknown normalization {normalization!r}")


def prepare_mask(mask: np.ndarray) -> np.ndarray:
    """Arbitrary binary mask -> 388x388 {0,1} target."""
    resized = resize_nearest(np.asarray(mask), NET_OUTPUT_SIZE, NET_OUTPUT_SIZE)
    return (resized > 0).astype(np.uint8)


def prepare_pair(img: np.ndarray, mask: np.ndarray | None = None) -> NetInputPair:
    return NetInputPair(
        image=prepare_image(img),
        mask=None if mask is None else prepare_mask(mask),
    )


def augment(
    image: np.ndarray,
    mask: np.ndarray,
    rng: np.random.Generator,
    cfg: AugmentConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply one random shift+zoom to a registered image/mask pair.

    The image is resampled bilinearly with mirrored border fill, the
    mask with nearest-neighbor and zero fill, so mask values stay
    binary. One (dy, dx, zoom) triple is drawn per call.
    """
    h, w = image.shape
    dy = rng.uniform(-cfg.max_shift_fraction * h, cfg.max_shift_fraction * h)
    dx = rng.uniform(-cfg.max_shift_fraction * w, cfg.max_shift_fraction * w)
    zoom = rng.uniform(*cfg.zoom_range)

    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    src_r = (rows - dy - cy) / zoom + cy
    src_c = (cols - dx - cx) / zoom + cx
    coords = np.stack([src_r, src_c])

    out_img = ndimage.map_coordinates(image, coords, order=1, mode="mirror")
    out_mask = ndimage.map_coordinates(mask, coords, order=0, mode="constant", cval=0)
    return out_img, out_mask


def binarize_argmax(prob: np.ndarray) -> np.ndarray:
    """Per-pixel argmax of (background, foreground); ties go to background."""
    prob = np.asarray(prob)
    if prob.ndim != 3 or prob.shape[-1] != 2:
        raise ShapeMismatch(f"expected HxWx2 probabilities, got {prob.shape}")
    return (prob[..., 1] > prob[..., 0]).astype(np.uint8)


def dice(truth: np.ndarray, pred: np.ndarray) -> float:
    """Dice similarity 2|G n P| / (|G| + |P|); two empty masks give 1.0."""
    truth = np.asarray(truth)
    pred = np.asarray(pred)
    if truth.shape != pred.shape:
        raise ShapeMismatch(f"mask shapes differ: {truth.shape} vs {pred.shape}")
    t = truth != 0
    p = pred != 0
    total = int(t.sum()) + int(p.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((t & p).sum()) / total


def soft_dice_loss(prob_fg: np.ndarray, truth: np.ndarray) -> float:
    """Differentiable Dice loss with additive smoothing.

    1 - (2 sum(p*g) + eps) / (sum(p) + sum(g) + eps), eps = 1.
    """
    prob_fg = np.asarray(prob_fg, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if prob_fg.shape != truth.shape:
        raise ShapeMismatch(f"shapes differ: {prob_fg.shape} vs {truth.shape}")
    num = 2.0 * float((prob_fg * truth).sum()) + SOFT_DICE_EPS
    den = float(prob_fg.sum()) + float(truth.sum()) + SOFT_DICE_EPS
    return 1.0 - num / den
