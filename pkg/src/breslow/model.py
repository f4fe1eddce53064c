"""Trainable model and the two-phase training procedure.

The network is a per-feature standardization (fixed after computation from the
training fold), a stack of residual-scale affine blocks with a ReLU ramp that
stands in for the fine-tuned backbone tail, dropout, and a dense two-way
softmax head. Phase 1 trains the head with every block frozen; phase 2
unfreezes the last blocks at a reduced learning rate with a fresh optimizer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .data import Dataset
from .focal import FocalConfig, focal_loss_batch, focal_loss_grad_batch
from .optim import STEP_FNS, eval_point, sf_adam_init

# Fixed inter-block nonlinearity; echoed in config output so runs are comparable.
NONLINEARITY = "relu"
_STD_FLOOR = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    focal: FocalConfig = field(default_factory=FocalConfig)
    dropout: float = 0.3
    lr_phase1: float = 1e-3
    lr_phase2: float = 1e-5
    epochs_phase1: int = 50
    epochs_phase2: int = 50
    unfreeze_blocks: int = 4
    adapter_blocks: int = 6
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "schedule_free"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    early_stop_patience: int | None = None

    def __post_init__(self):
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.lr_phase1 <= 0 or self.lr_phase2 <= 0:
            raise ValueError("learning rates must be positive")
        if self.epochs_phase1 < 0 or self.epochs_phase2 < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0 <= self.unfreeze_blocks <= self.adapter_blocks:
            raise ValueError(
                f"unfreeze_blocks must lie in [0, {self.adapter_blocks}], "
                f"got {self.unfreeze_blocks}"
            )
        if self.optimizer not in STEP_FNS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["focal"]["alpha"] = list(self.focal.alpha)
        d["nonlinearity"] = NONLINEARITY
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d.pop("nonlinearity", None)
        focal = d.pop("focal")
        return cls(focal=FocalConfig(focal["gamma"], tuple(focal["alpha"]), focal["smoothing"]), **d)


@dataclass(frozen=True)
class AdapterBlock:
    weight: np.ndarray  # D x D
    bias: np.ndarray    # D
    frozen: bool


@dataclass(frozen=True)
class ModelParams:
    norm_mean: np.ndarray
    norm_std: np.ndarray
    blocks: tuple[AdapterBlock, ...]
    head_w: np.ndarray  # 2 x D
    head_b: np.ndarray  # 2

    @property
    def dim(self) -> int:
        return self.norm_mean.shape[0]


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_metrics: list[dict] = field(default_factory=list)
    phase_boundary: int | None = None


def init_params(dim: int, cfg: TrainConfig, rng: np.random.Generator) -> ModelParams:
    """Near-identity adapter (weights = I + small noise, zero bias), small head."""
    blocks = []
    for _ in range(cfg.adapter_blocks):
        w = np.eye(dim) + 0.01 * rng.standard_normal((dim, dim)) / np.sqrt(dim)
        blocks.append(AdapterBlock(weight=w, bias=np.zeros(dim), frozen=True))
    head_w = 0.01 * rng.standard_normal((2, dim))
    head_b = np.zeros(2)
    return ModelParams(
        norm_mean=np.zeros(dim), norm_std=np.ones(dim),
        blocks=tuple(blocks), head_w=head_w, head_b=head_b,
    )


def compute_norm_stats(features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and std from the training fold; std floored to avoid
    division by zero on constant features."""
    mean = features.mean(axis=0)
    std = np.maximum(features.std(axis=0), _STD_FLOOR)
    return mean, std


def _adapter_forward(params: ModelParams, x: np.ndarray, n_blocks: int | None = None) -> np.ndarray:
    h = (x - params.norm_mean) / params.norm_std if n_blocks is None else x
    blocks = params.blocks if n_blocks is None else params.blocks[len(params.blocks) - n_blocks:]
    for blk in blocks:
        h = np.maximum(h @ blk.weight.T + blk.bias, 0.0)
    return h


def forward_logits(
    params: ModelParams,
    features: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dropout: float = 0.0,
) -> np.ndarray:
    """Logits for one feature vector or an (N, D) batch."""
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if x.shape[1] != params.dim:
        raise ValueError(f"feature dimension {x.shape[1]} != model dimension {params.dim}")
    h = _adapter_forward(params, x)
    if mode == "train" and dropout > 0.0:
        if rng is None:
            raise ValueError("train mode with dropout requires an rng")
        keep = rng.random(h.shape) >= dropout
        h = h * keep / (1.0 - dropout)  # inverted scaling
    elif mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    logits = h @ params.head_w.T + params.head_b
    return logits if np.asarray(features).ndim > 1 else logits[0]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(
    params: ModelParams,
    features: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dropout: float = 0.0,
) -> np.ndarray:
    """Class probabilities (softmax of the logits)."""
    return _softmax(forward_logits(params, features, mode, rng, dropout))


# ---------------------------------------------------------------------------
# Flat-vector packing of the trainable subset (head + unfrozen blocks).

def _pack(params: ModelParams, trainable_blocks: list[int]) -> np.ndarray:
    parts = [params.head_w.ravel(), params.head_b.ravel()]
    for i in trainable_blocks:
        parts.append(params.blocks[i].weight.ravel())
        parts.append(params.blocks[i].bias.ravel())
    return np.concatenate(parts)


def _unpack(params: ModelParams, trainable_blocks: list[int], flat: np.ndarray) -> ModelParams:
    d = params.dim
    head_w = flat[: 2 * d].reshape(2, d)
    head_b = flat[2 * d: 2 * d + 2]
    off = 2 * d + 2
    blocks = list(params.blocks)
    for i in trainable_blocks:
        w = flat[off: off + d * d].reshape(d, d)
        off += d * d
        b = flat[off: off + d]
        off += d
        blocks[i] = AdapterBlock(weight=w, bias=b, frozen=False)
    return replace(params, blocks=tuple(blocks), head_w=head_w, head_b=head_b)


def _loss_and_grad(
    params: ModelParams,
    trainable_blocks: list[int],
    pre: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    drop_mask: np.ndarray | None,
) -> tuple[float, np.ndarray]:
    """Mean focal loss over a batch and its gradient in packed layout.

    ``pre`` is the activation entering the first trainable block (or the head
    when no blocks are trainable); frozen prefix work is done by the caller.
    """
    acts = [pre]
    h = pre
    for i in trainable_blocks:
        blk = params.blocks[i]
        h = np.maximum(h @ blk.weight.T + blk.bias, 0.0)
        acts.append(h)
    hd = h * drop_mask if drop_mask is not None else h
    logits = hd @ params.head_w.T + params.head_b

    loss = focal_loss_batch(logits, targets, cfg.focal)
    dlogits = focal_loss_grad_batch(logits, targets, cfg.focal)  # already / N

    g_head_w = dlogits.T @ hd
    g_head_b = dlogits.sum(axis=0)
    dh = dlogits @ params.head_w
    if drop_mask is not None:
        dh = dh * drop_mask
    g_blocks: list[tuple[np.ndarray, np.ndarray]] = []
    for idx in range(len(trainable_blocks) - 1, -1, -1):
        i = trainable_blocks[idx]
        da = dh * (acts[idx + 1] > 0.0)
        g_blocks.append((da.T @ acts[idx], da.sum(axis=0)))
        dh = da @ params.blocks[i].weight
    g_blocks.reverse()

    parts = [g_head_w.ravel(), g_head_b.ravel()]
    for gw, gb in g_blocks:
        parts.append(gw.ravel())
        parts.append(gb.ravel())
    return loss, np.concatenate(parts)


def model_loss_and_grad(
    params: ModelParams,
    features: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    trainable_blocks: list[int] | None = None,
) -> tuple[float, np.ndarray]:
    """Eval-mode loss and packed gradient for the head plus the given blocks;
    exposed for gradient verification."""
    if trainable_blocks is None:
        trainable_blocks = list(range(len(params.blocks)))
    n_frozen_prefix = _frozen_prefix(trainable_blocks, len(params.blocks))
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    pre = _prefix_forward(params, x, n_frozen_prefix)
    return _loss_and_grad(params, trainable_blocks, pre, np.asarray(targets), cfg, None)


def _frozen_prefix(trainable_blocks: list[int], n_blocks: int) -> int:
    """Trainable blocks must form a suffix; returns the frozen prefix length."""
    if not trainable_blocks:
        return n_blocks
    first = min(trainable_blocks)
    if sorted(trainable_blocks) != list(range(first, n_blocks)):
        raise ValueError("trainable blocks must be a contiguous suffix")
    return first


def _prefix_forward(params: ModelParams, x: np.ndarray, n_frozen_prefix: int) -> np.ndarray:
    h = (x - params.norm_mean) / params.norm_std
    for blk in params.blocks[:n_frozen_prefix]:
        h = np.maximum(h @ blk.weight.T + blk.bias, 0.0)
    return h


# ---------------------------------------------------------------------------
# Training loops.

def _tail_logits(params: ModelParams, trainable_blocks: list[int], pre: np.ndarray) -> np.ndarray:
    h = pre
    for i in trainable_blocks:
        blk = params.blocks[i]
        h = np.maximum(h @ blk.weight.T + blk.bias, 0.0)
    return h @ params.head_w.T + params.head_b


def _val_snapshot(params, trainable_blocks, pre_val, y_val, cfg: TrainConfig) -> dict:
    if not len(y_val):
        return {"val_loss": float("nan"), "val_accuracy": float("nan")}
    logits = _tail_logits(params, trainable_blocks, pre_val)
    pred = (_softmax(logits)[:, 1] >= 0.5).astype(np.int64)
    return {
        "val_loss": float(focal_loss_batch(logits, y_val, cfg.focal)),
        "val_accuracy": float((pred == y_val).mean()),
    }


def _run_phase(
    params: ModelParams,
    trainable_blocks: list[int],
    X: np.ndarray,
    y: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig,
    lr: float,
    epochs: int,
    rng: np.random.Generator,
    history: TrainHistory,
) -> ModelParams:
    if epochs == 0:
        return params
    trainable_set = set(trainable_blocks)
    params = replace(
        params,
        blocks=tuple(
            replace(b, frozen=i not in trainable_set) for i, b in enumerate(params.blocks)
        ),
    )
    n = X.shape[0]
    n_prefix = _frozen_prefix(trainable_blocks, len(params.blocks))
    pre = _prefix_forward(params, X, n_prefix)  # frozen in-phase, cache once
    pre_val = _prefix_forward(params, X_val, n_prefix) if len(y_val) else X_val

    state = sf_adam_init(_pack(params, trainable_blocks), lr, cfg.beta1, cfg.beta2, cfg.eps)
    step_fn = STEP_FNS[cfg.optimizer]
    best_val = np.inf
    stall = 0

    current = params
    for _ in range(epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start: start + cfg.batch_size]
            drop = None
            if cfg.dropout > 0.0:
                keep = rng.random((len(idx), X.shape[1])) >= cfg.dropout
                drop = keep / (1.0 - cfg.dropout)
            batch_pre, batch_y = pre[idx], y[idx]
            loss_box = []

            def grad_at(point):
                candidate = _unpack(current, trainable_blocks, point)
                loss, g = _loss_and_grad(candidate, trainable_blocks, batch_pre, batch_y, cfg, drop)
                loss_box.append(loss)
                return g

            state = step_fn(state, grad_at)
            batch_losses.append(loss_box[0])
        current = _unpack(params, trainable_blocks, eval_point(state))
        history.train_loss.append(float(np.mean(batch_losses)))
        snap = _val_snapshot(current, trainable_blocks, pre_val, y_val, cfg)
        history.val_metrics.append(snap)
        if cfg.early_stop_patience is not None and len(y_val):
            if snap["val_loss"] < best_val - 1e-12:
                best_val = snap["val_loss"]
                stall = 0
            else:
                stall += 1
                if stall >= cfg.early_stop_patience:
                    break
    return current


def _prepare(train: Dataset, val: Dataset | None, cfg: TrainConfig):
    X, y = train.feature_matrix(), train.label_array()
    if len(np.unique(y)) < 2:
        raise ValueError("training fold must contain both classes")
    if val is not None and len(val):
        X_val, y_val = val.feature_matrix(), val.label_array()
    else:
        X_val, y_val = np.zeros((0, X.shape[1])), np.zeros(0, dtype=np.int64)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(X.shape[1], cfg, rng)
    mean, std = compute_norm_stats(X)  # computed once, never modified
    params = replace(params, norm_mean=mean, norm_std=std)
    return params, X, y, X_val, y_val, rng


def train_two_phase(
    train: Dataset, val: Dataset | None, cfg: TrainConfig
) -> tuple[ModelParams, TrainHistory]:
    """Head-only training on the frozen adapter, then fine-tuning of the last
    ``unfreeze_blocks`` blocks at ``lr_phase2`` with a fresh optimizer state."""
    params, X, y, X_val, y_val, rng = _prepare(train, val, cfg)
    history = TrainHistory(phase_boundary=cfg.epochs_phase1)

    params = _run_phase(
        params, [], X, y, X_val, y_val, cfg, cfg.lr_phase1, cfg.epochs_phase1, rng, history
    )
    n_blocks = len(params.blocks)
    unfrozen = list(range(n_blocks - cfg.unfreeze_blocks, n_blocks))
    params = _run_phase(
        params, unfrozen, X, y, X_val, y_val, cfg, cfg.lr_phase2, cfg.epochs_phase2, rng, history
    )
    return params, history


def train_single_phase(
    train: Dataset, val: Dataset | None, cfg: TrainConfig
) -> tuple[ModelParams, TrainHistory]:
    """Ablation baseline: everything unfrozen from epoch 0, single learning
    rate, total epochs epochs_phase1 + epochs_phase2."""
    params, X, y, X_val, y_val, rng = _prepare(train, val, cfg)
    history = TrainHistory(phase_boundary=None)
    all_blocks = list(range(len(params.blocks)))
    total = cfg.epochs_phase1 + cfg.epochs_phase2
    params = _run_phase(
        params, all_blocks, X, y, X_val, y_val, cfg, cfg.lr_phase1, total, rng, history
    )
    return params, history


# ---------------------------------------------------------------------------
# Checkpoints: versioned npz with the config embedded as JSON; round-trip exact.

CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: ModelParams, cfg: TrainConfig) -> None:
    arrays = {
        "version": np.array(CHECKPOINT_VERSION),
        "norm_mean": params.norm_mean,
        "norm_std": params.norm_std,
        "head_w": params.head_w,
        "head_b": params.head_b,
        "frozen": np.array([b.frozen for b in params.blocks]),
        "config_json": np.array(json.dumps(cfg.to_dict(), sort_keys=True)),
    }
    for i, blk in enumerate(params.blocks):
        arrays[f"block_{i}_w"] = blk.weight
        arrays[f"block_{i}_b"] = blk.bias
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[ModelParams, TrainConfig]:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        cfg = TrainConfig.from_dict(json.loads(str(data["config_json"])))
        frozen = data["frozen"]
        blocks = tuple(
            AdapterBlock(data[f"block_{i}_w"], data[f"block_{i}_b"], bool(frozen[i]))
            for i in range(len(frozen))
        )
        params = ModelParams(
            norm_mean=data["norm_mean"], norm_std=data["norm_std"],
            blocks=blocks, head_w=data["head_w"], head_b=data["head_b"],
        )
    return params, cfg
