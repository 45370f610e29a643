"""The three training avenues over dataset manifests.

Avenue 1 trains from scratch on the target data over k folds. Avenues
2 and 3 first pretrain once on an auxiliary manifest (simulated or
natural images), evaluate that network zero-shot, then fine-tune its
contraction path per fold on the target data. Reports carry one row
per network with train/test DSC as mean +- population std across folds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import data
from .errors import HarnessError
from .model import UNetSpec, build_unet
from .train import TrainConfig, evaluate_entries, seed_everything, train, finetune

import numpy as np

_KIND_TAGS = {"simulated": "sim", "natural": "nat", "invivo": "invivo"}


@dataclass(frozen=True)
class AvenueSpec:
    id: int
    finetune_manifest: Path
    pretrain_manifest: Path | None = None
    finetune_scope: str = "contraction"
    network_name: str | None = None  # override for variants like Ft_nat420_invivo

    def __post_init__(self):
        if self.id not in (1, 2, 3):
            raise ValueError("avenue id must be 1, 2, or 3")
        if self.id == 1 and self.pretrain_manifest is not None:
            raise ValueError("avenue 1 trains from scratch and takes no pretrain manifest")
        if self.id in (2, 3) and self.pretrain_manifest is None:
            raise ValueError(f"avenue {self.id} requires a pretrain manifest")


@dataclass
class ReportRow:
    name: str
    per_fold: list[dict]
    train_mean: float
    train_std: float
    test_mean: float
    test_std: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "per_fold": self.per_fold,
            "train_mean": self.train_mean,
            "train_std": self.train_std,
            "test_mean": self.test_mean,
            "test_std": self.test_std,
        }


@dataclass
class AvenueReport:
    avenue: int
    rows: list[ReportRow] = field(default_factory=list)

    def row(self, name: str) -> ReportRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"avenue": self.avenue, "rows": [r.to_dict() for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def render_table(self) -> str:
        lines = [f"{'Network':<20} {'Train':>14} {'Test':>14}"]
        lines.append("-" * 50)
        for row in self.rows:
            lines.append(
                f"{row.name:<20} "
                f"{row.train_mean:.2f} ± {row.train_std:.2f}   "
                f"{row.test_mean:.2f} ± {row.test_std:.2f}"
            )
        return "\n".join(lines)

    def write(self, path) -> None:
        path = Path(path)
        path.write_text(self.to_json())
        path.with_suffix(".txt").write_text(self.render_table() + "\n")


def _aggregate(name: str, per_fold: list[dict]) -> ReportRow:
    train = [f["train_dsc"] for f in per_fold]
    test = [f["test_dsc"] for f in per_fold]
    return ReportRow(
        name=name,
        per_fold=per_fold,
        train_mean=float(np.mean(train)),
        train_std=float(np.std(train)),
        test_mean=float(np.mean(test)),
        test_std=float(np.std(test)),
    )


def _network_name(prefix: str, spec: AvenueSpec, pre_kind: str | None, ft_kind: str) -> str:
    if spec.network_name is not None:
        return spec.network_name
    ft_tag = _KIND_TAGS.get(ft_kind, ft_kind)
    if prefix == "Pt" and pre_kind is None:
        return f"Pt_{ft_tag}"
    pre_tag = _KIND_TAGS.get(pre_kind, pre_kind)
    if prefix == "Pt":
        return f"Pt_{pre_tag}"
    return f"Ft_{pre_tag}_{ft_tag}"


def run_avenue(
    spec: AvenueSpec,
    unet_spec: UNetSpec,
    train_cfg: TrainConfig,
    pretrain_cfg: TrainConfig | None = None,
    k: int = 5,
    fold_seed: int = 0,
    out_path: Path | None = None,
) -> AvenueReport:
    """Execute one avenue end to end and aggregate a report.

    The target manifest's train+val pool is dealt into k folds; fold i
    is the validation set of run i. Test DSC is always measured on the
    manifest's test split. For avenues 2/3 the pretrained network also
    gets a zero-shot row evaluated on the same pool and test split.
    """
    target = data.load_manifest(spec.finetune_manifest)
    pool = target.pool_entries()
    test_entries = target.split_entries("test")
    if not pool or not test_entries:
        raise HarnessError("target manifest needs nonempty train+val pool and test split")
    folds = data.deal_folds([e.id for e in pool], k, fold_seed)
    out_size = unet_spec.output_size

    report = AvenueReport(avenue=spec.id)
    pretrained_weights = None
    pre_kind = None

    if spec.id in (2, 3):
        aux = data.load_manifest(spec.pretrain_manifest)
        pre_kind = aux.dataset_kind
        cfg = pretrain_cfg or train_cfg
        seed_everything(cfg.seed)
        model = build_unet(unet_spec, init_seed=cfg.seed, l2_coeff=cfg.l2_coeff)
        result = train(
            model, aux.split_entries("train"), aux.split_entries("val"), unet_spec, cfg
        )
        pretrained_weights = result.model.get_weights()
        pool_mean, _, _ = evaluate_entries(result.model, pool, out_size)
        test_mean, _, _ = evaluate_entries(result.model, test_entries, out_size)
        zero_shot = [{"fold": None, "train_dsc": pool_mean, "test_dsc": test_mean}]
        report.rows.append(
            _aggregate(_network_name("Pt", spec, pre_kind, target.dataset_kind), zero_shot)
        )

    per_fold = []
    for fold_index in range(k):
        val_ids = folds[fold_index]
        train_ids = [i for j, f in enumerate(folds) if j != fold_index for i in f]
        train_entries = target.by_id(train_ids)
        val_entries = target.by_id(val_ids)
        run_seed = train_cfg.seed + fold_index
        if spec.id == 1:
            seed_everything(run_seed)
            model = build_unet(unet_spec, init_seed=run_seed, l2_coeff=train_cfg.l2_coeff)
            result = train(model, train_entries, val_entries, unet_spec, train_cfg)
        else:
            result = finetune(
                pretrained_weights,
                unet_spec,
                train_entries,
                val_entries,
                train_cfg,
                scope=spec.finetune_scope,
                init_seed=run_seed,
            )
        train_mean, _, _ = evaluate_entries(result.model, train_entries, out_size)
        test_mean, _, _ = evaluate_entries(result.model, test_entries, out_size)
        per_fold.append(
            {"fold": fold_index, "train_dsc": train_mean, "test_dsc": test_mean}
        )

    prefix = "Pt" if spec.id == 1 else "Ft"
    report.rows.append(
        _aggregate(
            _network_name(prefix, spec, pre_kind, target.dataset_kind), per_fold
        )
    )
    if out_path is not None:
        report.write(out_path)
    return report
