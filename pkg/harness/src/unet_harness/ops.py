"""Array-space contracts the harness shares with the dataset tooling.

These operations re-implement the preprocessing and metric behavior the
dataset generator exports conformance fixtures for: corner-aligned
resizing, non-edge-repeating mirror padding, min-max normalization,
argmax binarization, and the Dice coefficient. The fixture tests pin
them bit-for-bit against the exported golden files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

NET_OUTPUT_SIZE = 388
MIRROR_PAD = 92
NET_INPUT_SIZE = NET_OUTPUT_SIZE + 2 * MIRROR_PAD  # 572

SOFT_DICE_EPS = 1.0


@dataclass(frozen=True)
class AugmentConfig:
    """Shift/zoom ranges for on-the-fly training augmentation."""

    max_shift_fraction: float = 0.10
    zoom_range: tuple[float, float] = (0.9, 1.1)


def _axis_coords(n_out: int, n_in: int) -> np.ndarray:
    if n_out == 1:
        return np.zeros(1)
    return np.arange(n_out) * ((n_in - 1) / (n_out - 1))


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize."""
    img = np.asarray(img, dtype=float)
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
    h, w = img.shape
    r = np.clip(np.rint(_axis_coords(out_h, h)).astype(np.int64), 0, h - 1)
    c = np.clip(np.rint(_axis_coords(out_w, w)).astype(np.int64), 0, w - 1)
    return img[r[:, None], c[None, :]]


def mirror_pad(img: np.ndarray, pad: int) -> np.ndarray:
    """Reflection padding without repeating the border pixel.

    Pads wider than the image fold back and forth (numpy reflect
    semantics), which scaled-down network inputs rely on.
    """
    return np.pad(np.asarray(img), pad, mode="reflect")


def normalize01(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    lo = img.min()
    hi = img.max()
    if hi == lo:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def prepare_image(img: np.ndarray, out_size: int = NET_OUTPUT_SIZE) -> np.ndarray:
    """Grayscale image -> (out_size + 184)^2 network input in [0, 1]."""
    resized = resize_bilinear(img, out_size, out_size)
    return normalize01(mirror_pad(resized, MIRROR_PAD))


def prepare_mask(mask: np.ndarray, out_size: int = NET_OUTPUT_SIZE) -> np.ndarray:
    """Binary mask -> out_size^2 {0,1} target."""
    return (resize_nearest(np.asarray(mask), out_size, out_size) > 0).astype(np.uint8)


def augment(
    image: np.ndarray,
    mask: np.ndarray,
    rng: np.random.Generator,
    cfg: AugmentConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """One random shift+zoom applied identically to image and mask.

    Bilinear with mirrored fill for the image, nearest with zero fill
    for the mask, so the mask stays binary.
    """
    h, w = image.shape
    dy = rng.uniform(-cfg.max_shift_fraction * h, cfg.max_shift_fraction * h)
    dx = rng.uniform(-cfg.max_shift_fraction * w, cfg.max_shift_fraction * w)
    zoom = rng.uniform(*cfg.zoom_range)
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    coords = np.stack([(rows - dy - cy) / zoom + cy, (cols - dx - cx) / zoom + cx])
    out_img = ndimage.map_coordinates(image, coords, order=1, mode="mirror")
    out_mask = ndimage.map_coordinates(mask, coords, order=0, mode="constant", cval=0)
    return out_img, out_mask


def binarize_argmax(prob: np.ndarray) -> np.ndarray:
    """Foreground where p(fg) > p(bg); ties go to background."""
    return (prob[..., 1] > prob[..., 0]).astype(np.uint8)


def dice(truth: np.ndarray, pred: np.ndarray) -> float:
    """2|G n P| / (|G| + |P|); 1.0 when both masks are empty."""
    t = np.asarray(truth) != 0
    p = np.asarray(pred) != 0
    if t.shape != p.shape:
        raise ValueError(f"mask shapes differ: {t.shape} vs {p.shape}")
    total = int(t.sum()) + int(p.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((t & p).sum()) / total
