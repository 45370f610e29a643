"""Dataset assembly: batch simulation, corpus ingestion, splits, folds.

Every dataset is described by a JSON manifest holding the generation
seeds and configuration, the image/mask file list with split labels,
and per-split counts. Manifests are written canonically (sorted keys,
fixed layout) so identical inputs produce identical bytes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .beamsim import AcousticConfig, simulate_image
from .errors import (
    CorpusValidationError,
    KTooLarge,
    MissingMask,
    NonBinaryMask,
    NTooLarge,
    ShapeMismatch,
)
from .grid import default_grid
from .phantom import LesionSpec, PhantomConfig

DATASET_KINDS = ("simulated", "invivo", "natural")
SPLITS = ("train", "val", "test")

_LUMA = (0.299, 0.587, 0.114)


# ---------------------------------------------------------------------------
# Split policies


@dataclass(frozen=True)
class SplitPolicy:
    """Train/val/test sizing, either fractional or by absolute count."""

    train: float
    val: float
    test: float | None
    by_count: bool
    seed: int = 0

    @classmethod
    def by_fraction(cls, train: float, val: float, test: float, seed: int = 0) -> "SplitPolicy":
        if min(train, val, test) < 0 or abs(train + val + test - 1.0) > 1e-9:
            raise ValueError("split fractions must be nonnegative and sum to 1")
        return cls(train=train, val=val, test=test, by_count=False, seed=seed)

    @classmethod
    def by_counts(
        cls, train: int, val: int, test: int | None = None, seed: int = 0
    ) -> "SplitPolicy":
        if train < 0 or val < 0 or (test is not None and test < 0):
            raise ValueError("split counts must be nonnegative")
        return cls(train=train, val=val, test=test, by_count=True, seed=seed)

    def counts_for(self, n: int) -> tuple[int, int, int]:
        if self.by_count:
            train, val = int(self.train), int(self.val)
            test = n - train - val if self.test is None else int(self.test)
            if train + val + test != n or test < 0:
                raise ValueError(
                    f"split counts {train}/{val}/{test} do not sum to corpus size {n}"
                )
            return train, val, test
        train = round(self.train * n)
        val = round(self.val * n)
        test = n - train - val
        if test < 0:
            raise ValueError(f"split fractions over-allocate a corpus of {n}")
        return train, val, test


SIM_SPLIT = SplitPolicy.by_fraction(0.60, 0.15, 0.25)


# ---------------------------------------------------------------------------
# Manifests


@dataclass
class ManifestEntry:
    id: str
    image_path: str
    mask_path: str
    split: str
    seed: int | None = None
    lesions: list[LesionSpec] | None = None

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "image_path": self.image_path,
            "mask_path": self.mask_path,
            "split": self.split,
        }
        if self.seed is not None:
            d["seed"] = self.seed
        if self.lesions is not None:
            d["lesions"] = [l.to_dict() for l in self.lesions]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestEntry":
        lesions = d.get("lesions")
        return cls(
            id=d["id"],
            image_path=d["image_path"],
            mask_path=d["mask_path"],
            split=d["split"],
            seed=d.get("seed"),
            lesions=None if lesions is None else [LesionSpec.from_dict(x) for x in lesions],
        )


@dataclass
class DatasetManifest:
    dataset_kind: str
    master_seed: int
    entries: list[ManifestEntry]
    generation_config: dict | None = None

    def __post_init__(self):
        if self.dataset_kind not in DATASET_KINDS:
            raise ValueError(f"unknown dataset_kind {self.dataset_kind!r}")
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("entry ids must be unique")

    @property
    def counts(self) -> dict:
        return {s: sum(1 for e in self.entries if e.split == s) for s in SPLITS}

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def to_dict(self) -> dict:
        return {
            "dataset_kind": self.dataset_kind,
            "master_seed": self.master_seed,
            "generation_config": self.generation_config,
            "counts": self.counts,
            "entries": [e.to_dict() for e in self.entries],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            dataset_kind=d["dataset_kind"],
            master_seed=d["master_seed"],
            entries=[ManifestEntry.from_dict(e) for e in d["entries"]],
            generation_config=d.get("generation_config"),
        )

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class FoldPlan:
    """k disjoint folds over the train+val pool; fold i validates run i."""

    k: int
    folds: tuple[tuple[str, ...], ...]

    def split_ids(self, fold: int) -> tuple[list[str], list[str]]:
        """(train_ids, val_ids) for one cross-validation run."""
        val = list(self.folds[fold])
        train = [i for j, f in enumerate(self.folds) if j != fold for i in f]
        return train, val


# ---------------------------------------------------------------------------
# PNG helpers


def save_gray_png(path, values01: np.ndarray) -> None:
    """Save a [0,1] float image as an 8-bit grayscale PNG."""
    arr = np.rint(np.clip(values01, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def save_mask_png(path, mask01: np.ndarray) -> None:
    """Save a {0,1} mask as an 8-bit PNG with values {0, 255}."""
    Image.fromarray((np.asarray(mask01) != 0).astype(np.uint8) * 255, mode="L").save(path)


def load_image(path) -> np.ndarray:
    """Load a PNG as a numpy array (2D grayscale or HxWx3 RGB)."""
    arr = np.asarray(Image.open(path))
    if arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, :3]
    return arr


def load_mask(path) -> np.ndarray:
    """Load a {0,255} mask PNG as a {0,1} uint8 array; validates values."""
    arr = load_image(path)
    if arr.ndim == 3:
        if not (arr[..., 0] == arr[..., 1]).all() or not (arr[..., 1] == arr[..., 2]).all():
            raise NonBinaryMask(f"{path}: RGB mask channels disagree")
        arr = arr[..., 0]
    values = np.unique(arr)
    if not np.isin(values, (0, 255)).all():
        bad = [int(v) for v in values if v not in (0, 255)]
        raise NonBinaryMask(f"{path}: mask contains values {bad}, expected {{0, 255}}")
    return (arr != 0).astype(np.uint8)


def to_luma(rgb: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma conversion of an RGB uint8 image to grayscale."""
    y = rgb[..., 0] * _LUMA[0] + rgb[..., 1] * _LUMA[1] + rgb[..., 2] * _LUMA[2]
    return np.rint(y).astype(np.uint8)


# ---------------------------------------------------------------------------
# Simulated dataset generation


def per_image_seed(master_seed: int, index: int) -> int:
    """Stable 64-bit per-image seed; independent of generation order."""
    digest = hashlib.blake2b(
        struct.pack("<QQ", master_seed % 2**64, index), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def _render_one(args) -> tuple[int, list[dict]]:
    index, seed, phantom_cfg, acoustic_cfg, height, width, image_path, mask_path = args
    grid = default_grid(phantom_cfg, height=height, width=width)
    image, mask, lesions = simulate_image(seed, phantom_cfg, acoustic_cfg, grid)
    save_gray_png(image_path, image.pixels)
    save_mask_png(mask_path, mask.pixels)
    return index, [l.to_dict() for l in lesions]


def generate_sim_dataset(
    count: int,
    master_seed: int,
    out_dir,
    phantom_cfg: PhantomConfig | None = None,
    acoustic_cfg: AcousticConfig | None = None,
    grid_height: int = 512,
    grid_width: int = 340,
    threads: int = 1,
) -> DatasetManifest:
    """Simulate ``count`` image/mask pairs and write them plus a manifest.

    Per-image seeds are derived from (master_seed, index), so the result
    is byte-identical regardless of worker count or scheduling. Files go
    to ``out_dir/images`` and ``out_dir/masks``; the manifest to
    ``out_dir/manifest.json`` with a 60/15/25 train/val/test split.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    phantom_cfg = phantom_cfg or PhantomConfig()
    acoustic_cfg = acoustic_cfg or AcousticConfig()
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)

    jobs = []
    for i in range(count):
        name = f"sim_{i:05d}"
        jobs.append(
            (
                i,
                per_image_seed(master_seed, i),
                phantom_cfg,
                acoustic_cfg,
                grid_height,
                grid_width,
                out_dir / "images" / f"{name}.png",
                out_dir / "masks" / f"{name}_mask.png",
            )
        )

    lesions_by_index: dict[int, list[dict]] = {}
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for index, lesions in pool.map(_render_one, jobs, chunksize=4):
                lesions_by_index[index] = lesions
    else:
        for job in jobs:
            index, lesions = _render_one(job)
            lesions_by_index[index] = lesions

    n_train, n_val, _ = SIM_SPLIT.counts_for(count)
    entries = []
    for i in range(count):
        name = f"sim_{i:05d}"
        split = "train" if i < n_train else ("val" if i < n_train + n_val else "test")
        entries.append(
            ManifestEntry(
                id=name,
                image_path=f"images/{name}.png",
                mask_path=f"masks/{name}_mask.png",
                split=split,
                seed=per_image_seed(master_seed, i),
                lesions=[LesionSpec.from_dict(d) for d in lesions_by_index[i]],
            )
        )

    manifest = DatasetManifest(
        dataset_kind="simulated",
        master_seed=master_seed,
        entries=entries,
        generation_config={
            "phantom": dataclasses.asdict(phantom_cfg),
            "acoustic": dataclasses.asdict(acoustic_cfg),
            "grid": {"height": grid_height, "width": grid_width},
        },
    )
    manifest.write(out_dir / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# External corpus ingestion


def ingest_labeled_corpus(
    corpus_dir,
    kind: str,
    policy: SplitPolicy,
    out_dir=None,
) -> DatasetManifest:
    """Discover, validate, and split an ``<id>.png`` / ``<id>_mask.png`` corpus.

    Masks must hold only {0, 255}; image and mask shapes must agree. RGB
    images are converted to grayscale by luma weighting and the converted
    copies written under ``out_dir/converted``. All malformed pairs are
    collected into a single CorpusValidationError. The manifest is written
    to ``out_dir/manifest.json`` with paths relative to ``out_dir``.
    """
    if kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}")
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir) if out_dir is not None else corpus_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    image_files = sorted(
        p for p in corpus_dir.glob("*.png") if not p.stem.endswith("_mask")
    )
    problems: list[tuple[str, Exception]] = []
    records: list[tuple[str, Path, Path]] = []

    for image_file in image_files:
        pair_id = image_file.stem
        mask_file = corpus_dir / f"{pair_id}_mask.png"
        if not mask_file.exists():
            problems.append((pair_id, MissingMask(f"no mask file {mask_file.name}")))
            continue
        try:
            mask = load_mask(mask_file)
            image = load_image(image_file)
            if image.ndim == 3:
                gray = to_luma(image)
                converted_dir = out_dir / "converted"
                converted_dir.mkdir(parents=True, exist_ok=True)
                image_file = converted_dir / f"{pair_id}.png"
                Image.fromarray(gray, mode="L").save(image_file)
                image = gray
            if image.shape != mask.shape:
                raise ShapeMismatch(
                    f"image {image.shape} vs mask {mask.shape}"
                )
        except (NonBinaryMask, ShapeMismatch) as err:
            problems.append((pair_id, err))
            continue
        records.append((pair_id, image_file, mask_file))

    if problems:
        raise CorpusValidationError(problems)
    n = len(records)
    n_train, n_val, n_test = policy.counts_for(n)

    rng = np.random.default_rng(policy.seed)
    order = rng.permutation(n)
    split_of: dict[str, str] = {}
    for rank, idx in enumerate(order):
        pair_id = records[idx][0]
        split_of[pair_id] = (
            "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")
        )

    entries = [
        ManifestEntry(
            id=pair_id,
            image_path=os.path.relpath(image_file, out_dir),
            mask_path=os.path.relpath(mask_file, out_dir),
            split=split_of[pair_id],
        )
        for pair_id, image_file, mask_file in records
    ]
    manifest = DatasetManifest(dataset_kind=kind, master_seed=policy.seed, entries=entries)
    manifest.write(out_dir / "manifest.json")
    return manifest


# ---------------------------------------------------------------------------
# Folds and subsampling


def make_folds(manifest: DatasetManifest, k: int, seed: int) -> FoldPlan:
    """Shuffle the train+val pool and deal it round-robin into k folds."""
    pool = [e.id for e in manifest.entries if e.split in ("train", "val")]
    if not pool:
        raise ValueError("train+val pool is empty")
    if k < 1 or k > len(pool):
        raise KTooLarge(f"k={k} for a pool of {len(pool)}")
    rng = np.random.default_rng(seed)
    shuffled = [pool[i] for i in rng.permutation(len(pool))]
    folds = tuple(tuple(shuffled[i::k]) for i in range(k))
    return FoldPlan(k=k, folds=folds)


def subsample(manifest: DatasetManifest, n: int, seed: int) -> DatasetManifest:
    """Keep a random n-subset of training entries; val/test untouched."""
    train_ids = [e.id for e in manifest.entries if e.split == "train"]
    if n > len(train_ids):
        raise NTooLarge(f"n={n} exceeds train split of {len(train_ids)}")
    rng = np.random.default_rng(seed)
    keep = {train_ids[i] for i in rng.permutation(len(train_ids))[:n]}
    entries = [e for e in manifest.entries if e.split != "train" or e.id in keep]
    return DatasetManifest(
        dataset_kind=manifest.dataset_kind,
        master_seed=manifest.master_seed,
        entries=entries,
        generation_config=manifest.generation_config,
    )
