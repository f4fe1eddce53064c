"""Melanoma depth-class training and explainability analytics over deep-feature vectors."""

from .data import (
    DEPTH_THRESHOLD_MM,
    BreslowStage,
    Dataset,
    DepthClass,
    Sample,
    depth_class_of,
    merge_datasets,
    parse_feature_file,
    stage_of,
    write_feature_file,
)
from .evaluation import (
    ConfusionCounts,
    CrossvalResult,
    FoldResult,
    MetricSet,
    ablate,
    crossval,
    metrics_from_confusion,
    stratified_kfold,
)
from .focal import FocalConfig, focal_loss, focal_loss_grad
from .model import (
    ModelParams,
    TrainConfig,
    TrainHistory,
    forward,
    load_checkpoint,
    save_checkpoint,
    train_single_phase,
    train_two_phase,
)
from .optim import SfAdamState, eval_point, plain_adam_step, sf_adam_init, sf_adam_step
from .projection import (
    Gaussian1D,
    GroupEllipse,
    PcaBasis,
    PlsBasis,
    fisher_axis_scores,
    fit_ellipse,
    fit_gaussian_1d,
    pca_fit,
    pls_fit,
    project,
)
from .regression import BinStats, RegressionFit, ThicknessPrediction, bin_stats, polyfit, r_squared, segment_r2
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
