"""Dataset manifests, sample loading, and deterministic batching.

The harness consumes the dataset tooling's JSON manifests and PNG
files. Augmentation draws are a pure function of (run seed, epoch,
entry id), so sample order and worker scheduling cannot change what
the network sees.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import ops
from .errors import DataError


@dataclass(frozen=True)
class Entry:
    id: str
    image_path: Path
    mask_path: Path
    split: str


@dataclass
class Manifest:
    dataset_kind: str
    master_seed: int
    entries: list[Entry]
    path: Path

    def split_entries(self, split: str) -> list[Entry]:
        return [e for e in self.entries if e.split == split]

    def pool_entries(self) -> list[Entry]:
        """Train+val pool used for cross-validation."""
        return [e for e in self.entries if e.split in ("train", "val")]

    def by_id(self, ids) -> list[Entry]:
        index = {e.id: e for e in self.entries}
        return [index[i] for i in ids]


def load_manifest(path) -> Manifest:
    path = Path(path)
    raw = json.loads(path.read_text())
    base = path.parent
    entries = [
        Entry(
            id=e["id"],
            image_path=base / e["image_path"],
            mask_path=base / e["mask_path"],
            split=e["split"],
        )
        for e in raw["entries"]
    ]
    return Manifest(
        dataset_kind=raw["dataset_kind"],
        master_seed=raw["master_seed"],
        entries=entries,
        path=path,
    )


def _load_gray(path: Path) -> np.ndarray:
    try:
        arr = np.asarray(Image.open(path))
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from err
    if arr.ndim == 3:  # RGB enters as luma grayscale
        arr = np.rint(
            arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
        ).astype(np.uint8)
    return arr


def load_raw_pair(entry: Entry) -> tuple[np.ndarray, np.ndarray]:
    """(grayscale image, {0,1} mask) at native resolution."""
    image = _load_gray(entry.image_path)
    mask = (_load_gray(entry.mask_path) != 0).astype(np.uint8)
    if image.shape != mask.shape:
        raise DataError(f"{entry.id}: image {image.shape} vs mask {mask.shape}")
    return image, mask


def _derived_rng(seed: int, *parts) -> np.random.Generator:
    text = ":".join([str(seed % 2**64), *map(str, parts)])
    digest = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def prepare_example(
    entry: Entry,
    out_size: int,
    augment_cfg: ops.AugmentConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(net input HxWx1 float32, target mask hxwx1 float32) for one entry."""
    image, mask = load_raw_pair(entry)
    image = ops.resize_bilinear(image, out_size, out_size)
    mask = ops.prepare_mask(mask, out_size)
    if augment_cfg is not None:
        image, mask = ops.augment(image, mask, rng, augment_cfg)
    net_input = ops.normalize01(ops.mirror_pad(image, ops.MIRROR_PAD))
    return (
        net_input[..., None].astype(np.float32),
        mask[..., None].astype(np.float32),
    )


def epoch_batches(
    entries: list[Entry],
    out_size: int,
    batch_size: int,
    seed: int,
    epoch: int,
    augment_cfg: ops.AugmentConfig | None,
):
    """Yield (X, Y) batches in a seeded per-epoch order.

    Each sample's augmentation stream is derived from
    (seed, epoch, entry id), independent of batch composition.
    """
    order = _derived_rng(seed, "order", epoch).permutation(len(entries))
    for start in range(0, len(entries), batch_size):
        chunk = [entries[i] for i in order[start : start + batch_size]]
        xs, ys = [], []
        for entry in chunk:
            rng = _derived_rng(seed, "aug", epoch, entry.id)
            x, y = prepare_example(entry, out_size, augment_cfg, rng)
            xs.append(x)
            ys.append(y)
        yield np.stack(xs), np.stack(ys)


def deal_folds(ids: list[str], k: int, seed: int) -> list[list[str]]:
    """Shuffle ids and deal round-robin into k folds (sizes differ by <=1)."""
    if not 1 <= k <= len(ids):
        raise ValueError(f"k={k} invalid for pool of {len(ids)}")
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    return [shuffled[i::k] for i in range(k)]
