"""Command-line surface: simulate, ingest, dice, fixtures.

Exit codes: 0 success, 1 domain/validation error, 2 usage error.
A config file (INI sections mirroring the module configs) can preset
any simulation parameter; explicit flags override file values.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen, imgops
from .beamsim import AcousticConfig
from .errors import SonosimError
from .phantom import LesionPolicy, PhantomConfig


def _load_config(path: str | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path:
        with open(path) as fh:
            parser.read_file(fh)
    return parser


def _section(cfg: configparser.ConfigParser, name: str) -> dict:
    return dict(cfg[name]) if cfg.has_section(name) else {}


def _phantom_from_config(cfg: configparser.ConfigParser) -> PhantomConfig:
    ph = _section(cfg, "phantom")
    le = _section(cfg, "lesions")
    policy_kwargs = {}
    if "class_mix" in le:
        policy_kwargs["class_mix"] = tuple(float(v) for v in le["class_mix"].split(","))
    if "count_min" in le or "count_max" in le:
        policy_kwargs["count_per_class"] = (
            int(le.get("count_min", 1)),
            int(le.get("count_max", 1)),
        )
    if "circle_probability" in le:
        policy_kwargs["circle_probability"] = float(le["circle_probability"])
    if "radius_min" in le or "radius_max" in le:
        policy_kwargs["radius_range"] = (
            float(le.get("radius_min", 3.0)),
            float(le.get("radius_max", 12.0)),
        )
    if "hyper_k_min" in le or "hyper_k_max" in le:
        policy_kwargs["hyper_k_range"] = (
            int(le.get("hyper_k_min", 1)),
            int(le.get("hyper_k_max", 10)),
        )
    if "hypo_l_min" in le or "hypo_l_max" in le:
        policy_kwargs["hypo_l_range"] = (
            float(le.get("hypo_l_min", 0.0)),
            float(le.get("hypo_l_max", 1.0)),
        )
    if "margin" in le:
        policy_kwargs["margin"] = float(le["margin"])
    return PhantomConfig(
        axial_extent=float(ph.get("axial_extent", 60.0)),
        lateral_extent=float(ph.get("lateral_extent", 40.0)),
        elevational_extent=float(ph.get("elevational_extent", 10.0)),
        standoff=float(ph.get("standoff", 30.0)),
        scatterer_density=float(ph.get("scatterer_density", 4.0)),
        lesion_policy=LesionPolicy(**policy_kwargs),
    )


def _acoustic_from_config(cfg: configparser.ConfigParser) -> AcousticConfig:
    ac = _section(cfg, "acoustic")
    return AcousticConfig(
        n_lines=int(ac.get("n_lines", 50)),
        center_frequency=float(ac.get("center_frequency", 3.5e6)),
        sampling_frequency=float(ac.get("sampling_frequency", 100e6)),
        sound_speed=float(ac.get("sound_speed", 1540.0)),
        fractional_bandwidth=float(ac.get("fractional_bandwidth", 0.6)),
        f_number=float(ac.get("f_number", 2.0)),
        dynamic_range_db=float(ac.get("dynamic_range_db", 60.0)),
    )


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    grid = _section(cfg, "grid")
    manifest = datagen.generate_sim_dataset(
        count=args.count,
        master_seed=args.seed,
        out_dir=args.out,
        phantom_cfg=_phantom_from_config(cfg),
        acoustic_cfg=_acoustic_from_config(cfg),
        grid_height=int(grid.get("height", 512)),
        grid_width=int(grid.get("width", 340)),
        threads=args.threads,
    )
    counts = manifest.counts
    print(Path(args.out) / "manifest.json")
    print(f"train={counts['train']} val={counts['val']} test={counts['test']}")
    return 0


def cmd_ingest(args) -> int:
    if args.train is not None or args.val is not None:
        if args.train is None or args.val is None:
            raise SonosimError("--train and --val must be given together")
        policy = datagen.SplitPolicy.by_counts(
            args.train, args.val, args.test, seed=args.seed
        )
    else:
        policy = datagen.SplitPolicy.by_fraction(0.60, 0.15, 0.25, seed=args.seed)
    manifest = datagen.ingest_labeled_corpus(
        args.corpus_dir, args.kind, policy, out_dir=args.out
    )
    if args.subsample_train is not None:
        manifest = datagen.subsample(manifest, args.subsample_train, seed=args.seed)
        manifest.write(Path(args.out or args.corpus_dir) / "manifest.json")
    counts = manifest.counts
    print(Path(args.out or args.corpus_dir) / "manifest.json")
    print(f"train={counts['train']} val={counts['val']} test={counts['test']}")
    return 0


def cmd_dice(args) -> int:
    truth_dir = Path(args.truth_dir)
    pred_dir = Path(args.pred_dir)
    truth_files = {p.name for p in truth_dir.glob("*.png")}
    pred_files = {p.name for p in pred_dir.glob("*.png")}
    unmatched = sorted(truth_files ^ pred_files)
    if unmatched:
        for name in unmatched:
            side = "prediction" if name in truth_files else "truth"
            print(f"unmatched ({side} missing): {name}", file=sys.stderr)
        return 1
    if not truth_files:
        print("no mask pairs found", file=sys.stderr)
        return 1
    scores = []
    for name in sorted(truth_files):
        score = imgops.dice(
            datagen.load_mask(truth_dir / name), datagen.load_mask(pred_dir / name)
        )
        scores.append(score)
        print(f"{name}\t{score:.4f}")
    mean = float(np.mean(scores))
    std = float(np.std(scores))  # population std, matching the report format
    print(f"{mean:.2f} ± {std:.2f}")
    return 0


def _fixture_image(rng: np.random.Generator, h: int = 300, w: int = 420) -> np.ndarray:
    """Deterministic synthetic grayscale image with structure plus noise."""
    yy, xx = np.mgrid[0:h, 0:w]
    ramp = 80.0 * xx / w + 40.0 * yy / h
    blob = 120.0 * np.exp(-(((yy - h / 3) / 40.0) ** 2 + ((xx - w / 2) / 60.0) ** 2))
    noise = rng.normal(0.0, 12.0, size=(h, w))
    return np.clip(ramp + blob + noise, 0, 255).astype(np.uint8)


def cmd_fixtures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    reflect = {"input": [1, 2, 3], "pad": 1, "output": [2, 1, 2, 3, 2]}
    (out / "reflect_1d.json").write_text(json.dumps(reflect, sort_keys=True, indent=2) + "\n")

    # Preprocessing chain: raw image -> 388 resize -> mirror pad -> [0,1].
    preproc = out / "preproc"
    preproc.mkdir(exist_ok=True)
    image_in = _fixture_image(rng)
    resized = imgops.resize_bilinear(image_in, imgops.NET_OUTPUT_SIZE, imgops.NET_OUTPUT_SIZE)
    net_input = imgops.prepare_image(image_in)
    yy, xx = np.mgrid[0 : image_in.shape[0], 0 : image_in.shape[1]]
    mask_in = (
        ((yy - image_in.shape[0] / 3) / 50.0) ** 2 + ((xx - image_in.shape[1] / 2) / 70.0) ** 2
        <= 1.0
    ).astype(np.uint8)
    np.save(preproc / "image_in.npy", image_in)
    np.save(preproc / "resized_388.npy", resized)
    np.save(preproc / "net_input_572.npy", net_input)
    datagen.save_mask_png(preproc / "mask_in.png", mask_in)
    np.save(preproc / "mask_388.npy", imgops.prepare_mask(mask_in))
    (preproc / "meta.json").write_text(
        json.dumps(
            {
                "chain": ["resize_bilinear_388", "mirror_pad_92", "normalize01"],
                "mask_chain": ["resize_nearest_388", "binarize"],
                "net_input_size": imgops.NET_INPUT_SIZE,
                "net_output_size": imgops.NET_OUTPUT_SIZE,
                "mirror_pad": imgops.MIRROR_PAD,
            },
            sort_keys=True,
            indent=2,
        )
        + "\n"
    )

    # Dice oracle cases with overlaps {all, none, half} -> {1.0, 0.0, 0.5}.
    dice_dir = out / "dice"
    truth_dir = dice_dir / "truth"
    pred_dir = dice_dir / "pred"
    truth_dir.mkdir(parents=True, exist_ok=True)
    pred_dir.mkdir(parents=True, exist_ok=True)
    full = np.zeros((16, 16), dtype=np.uint8)
    full[4:12, 4:12] = 1
    left = np.zeros((16, 16), dtype=np.uint8)
    left[:, 0:4] = 1
    right = np.zeros((16, 16), dtype=np.uint8)
    right[:, 8:12] = 1
    half_t = np.zeros((16, 16), dtype=np.uint8)
    half_t[:, 0:8] = 1
    half_p = np.zeros((16, 16), dtype=np.uint8)
    half_p[:, 4:12] = 1
    for name, truth, pred in (
        ("overlap_all.png", full, full),
        ("overlap_none.png", left, right),
        ("overlap_half.png", half_t, half_p),
    ):
        datagen.save_mask_png(truth_dir / name, truth)
        datagen.save_mask_png(pred_dir / name, pred)
    expected = {
        "per_pair": {"overlap_all.png": 1.0, "overlap_half.png": 0.5, "overlap_none.png": 0.0},
        "mean": 0.5,
        "std": float(np.std([1.0, 0.0, 0.5])),
        "summary": "0.50 ± 0.41",
    }
    (dice_dir / "expected.json").write_text(
        json.dumps(expected, sort_keys=True, indent=2) + "\n"
    )

    # Tiny simulated set for end-to-end consumers.
    datagen.generate_sim_dataset(
        count=8,
        master_seed=args.seed,
        out_dir=out / "sim8",
        threads=args.threads,
    )
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sonosim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file mirroring module settings")
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--threads", type=int, default=1, help="worker process cap")
    common.add_argument("--out", help="output directory")

    p = sub.add_parser("simulate", parents=[common], help="generate a simulated dataset")
    p.add_argument("--count", type=int, required=True, help="number of images")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", parents=[common], help="ingest an image/mask corpus")
    p.add_argument("corpus_dir")
    p.add_argument("--kind", choices=datagen.DATASET_KINDS, default="invivo")
    p.add_argument("--train", type=int, help="absolute train count")
    p.add_argument("--val", type=int, help="absolute val count")
    p.add_argument("--test", type=int, help="absolute test count (default: remainder)")
    p.add_argument("--subsample-train", type=int, help="subsample the train split to n")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("dice", parents=[common], help="score predicted masks against truth")
    p.add_argument("truth_dir")
    p.add_argument("pred_dir")
    p.set_defaults(func=cmd_dice)

    p = sub.add_parser("fixtures", parents=[common], help="emit conformance fixtures")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("simulate", "fixtures") and not args.out:
        parser.error(f"{args.command} requires --out")
    try:
        return args.func(args)
    except (SonosimError, ValueError, OSError) as err:
        if hasattr(err, "problems"):
            for pair_id, sub_err in err.problems:
                print(f"rejected {pair_id}: {sub_err}", file=sys.stderr)
        else:
            print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
