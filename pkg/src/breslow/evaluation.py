"""Stratified k-fold cross-validation, classification metrics, out-of-fold
prediction collection, and the ablation harness."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, DepthClass
from .focal import FocalConfig
from .model import TrainConfig, forward, train_single_phase, train_two_phase
from .seeding import derive_seed

DECISION_THRESHOLD = 0.5

# Table-order ablation variants: full model, cross-entropy (gamma=0, class
# weights retained), plain Adam, and single-phase fine-tuning.
ABLATION_VARIANTS = ("full", "no-focal", "no-scheduler", "single-phase")


@dataclass(frozen=True)
class FoldSplit:
    assignments: np.ndarray  # fold id per sample index
    k: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


@dataclass(frozen=True)
class MetricSet:
    recall: float
    precision: float
    accuracy: float
    f1: float

    def to_dict(self) -> dict:
        return {
            "recall": self.recall,
            "precision": self.precision,
            "accuracy": self.accuracy,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class OofPrediction:
    id: str
    thickness: float | None
    label: DepthClass
    p_high: float


@dataclass(frozen=True)
class FoldResult:
    fold: int
    confusion: ConfusionCounts
    metrics: MetricSet
    oof_predictions: tuple[OofPrediction, ...]


def stratified_kfold(labels, k: int, seed: int) -> FoldSplit:
    """Seed-deterministic stratified split; per-fold class counts stay within
    one of the proportional share. Classes absent from `labels` are ignored,
    but any present class must have at least k members."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    arr = np.asarray([lab.value if isinstance(lab, DepthClass) else lab for lab in labels])
    rng = np.random.default_rng(seed)
    assignments = np.full(arr.shape[0], -1, dtype=np.int64)
    for cls in sorted(set(arr.tolist())):
        idx = np.flatnonzero(arr == cls)
        if idx.size < k:
            raise ValueError(f"class {cls!r} has {idx.size} samples, fewer than k={k}")
        idx = rng.permutation(idx)
        # Deal the shuffled class round-robin; fold sizes differ by at most 1.
        for fold in range(k):
            assignments[idx[fold::k]] = fold
    return FoldSplit(assignments=assignments, k=k)


def metrics_from_confusion(c: ConfusionCounts) -> MetricSet:
    """Recall/precision/accuracy/F1 with 0/0 ratios defined as 0."""
    if c.total == 0:
        raise ValueError("confusion counts are empty")
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    accuracy = (c.tp + c.tn) / c.total
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricSet(recall=recall, precision=precision, accuracy=accuracy, f1=f1)


def confusion_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionCounts:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    return ConfusionCounts(
        tp=int(np.sum((y_pred == 1) & (y_true == 1))),
        fp=int(np.sum((y_pred == 1) & (y_true == 0))),
        fn=int(np.sum((y_pred == 0) & (y_true == 1))),
        tn=int(np.sum((y_pred == 0) & (y_true == 0))),
    )


def _run_fold(args) -> FoldResult:
    ds, cfg, split, fold, seed, single_phase = args
    train_ds = ds.subset(split.train_indices(fold))
    test_idx = split.test_indices(fold)
    test_ds = ds.subset(test_idx)
    fold_cfg = replace(cfg, seed=derive_seed(seed, f"fold:{fold}"))
    train = train_single_phase if single_phase else train_two_phase
    params, _ = train(train_ds, test_ds, fold_cfg)

    probs = forward(params, test_ds.feature_matrix(), mode="eval")
    p_high = probs[:, 1]
    y_true = test_ds.label_array()
    y_pred = (p_high >= DECISION_THRESHOLD).astype(np.int64)
    confusion = confusion_from_predictions(y_true, y_pred)
    oof = tuple(
        OofPrediction(id=s.id, thickness=s.thickness, label=s.label, p_high=float(p))
        for s, p in zip(test_ds.samples, p_high)
    )
    return FoldResult(
        fold=fold, confusion=confusion, metrics=metrics_from_confusion(confusion),
        oof_predictions=oof,
    )


@dataclass(frozen=True)
class CrossvalResult:
    folds: tuple[FoldResult, ...]
    pooled_confusion: ConfusionCounts
    pooled: MetricSet         # micro: metrics of summed confusion counts
    macro: MetricSet          # mean of per-fold metrics
    oof_predictions: tuple[OofPrediction, ...]


def crossval(
    ds: Dataset,
    cfg: TrainConfig,
    k: int,
    seed: int,
    single_phase: bool = False,
    jobs: int = 1,
) -> CrossvalResult:
    """Train on k-1 folds and test on the held-out fold, for every fold.

    Fold training seeds are derived from (seed, fold id), so serial and
    parallel execution produce identical results.
    """
    split = stratified_kfold([s.label for s in ds.samples], k, seed)
    tasks = [(ds, cfg, split, fold, seed, single_phase) for fold in range(k)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            folds = list(pool.map(_run_fold, tasks))
    else:
        folds = [_run_fold(t) for t in tasks]

    pooled_confusion = folds[0].confusion
    for fr in folds[1:]:
        pooled_confusion = pooled_confusion + fr.confusion
    pooled = metrics_from_confusion(pooled_confusion)
    macro = MetricSet(
        recall=float(np.mean([f.metrics.recall for f in folds])),
        precision=float(np.mean([f.metrics.precision for f in folds])),
        accuracy=float(np.mean([f.metrics.accuracy for f in folds])),
        f1=float(np.mean([f.metrics.f1 for f in folds])),
    )
    oof = tuple(p for f in folds for p in f.oof_predictions)
    return CrossvalResult(
        folds=tuple(folds), pooled_confusion=pooled_confusion,
        pooled=pooled, macro=macro, oof_predictions=oof,
    )


def variant_config(base_cfg: TrainConfig, variant: str) -> tuple[TrainConfig, bool]:
    """(config, single_phase flag) for a named ablation variant."""
    if variant == "full":
        return base_cfg, False
    if variant == "no-focal":
        focal = FocalConfig(0.0, base_cfg.focal.alpha, base_cfg.focal.smoothing)
        return replace(base_cfg, focal=focal), False
    if variant == "no-scheduler":
        return replace(base_cfg, optimizer="adam"), False
    if variant == "single-phase":
        return base_cfg, True
    raise ValueError(f"unknown variant {variant!r}; expected one of {ABLATION_VARIANTS}")


def ablate(
    ds: Dataset, base_cfg: TrainConfig, k: int, seed: int, jobs: int = 1
) -> dict[str, CrossvalResult]:
    """Run the four ablation variants over identical fold splits; returned in
    table row order (full, no-focal, no-scheduler, single-phase)."""
    results: dict[str, CrossvalResult] = {}
    for variant in ABLATION_VARIANTS:
        cfg, single_phase = variant_config(base_cfg, variant)
        results[variant] = crossval(ds, cfg, k, seed, single_phase=single_phase, jobs=jobs)
    return results
