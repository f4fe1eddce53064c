"""Binary focal loss with class weighting and label smoothing.

The loss for a softmax output p over two classes and a smoothed target
distribution q is ``sum_c q_c * alpha_c * (1 - p_c)^gamma * (-log p_c)``;
gamma = 0 recovers the weighted, smoothed cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Probability floor applied inside the (1 - p)^gamma focal factor only.
_P_FLOOR = 1e-12


@dataclass(frozen=True)
class FocalConfig:
    gamma: float = 0.3
    alpha: tuple[float, float] = (1.0, 5.0)
    smoothing: float = 0.02

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if len(self.alpha) != 2 or any(a <= 0 or not np.isfinite(a) for a in self.alpha):
            raise ValueError(f"alpha must be two positive weights, got {self.alpha}")
        if not 0 <= self.smoothing < 1:
            raise ValueError(f"smoothing must lie in [0, 1), got {self.smoothing}")


def _check_logits(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape[-1] != 2:
        raise ValueError(f"expected 2 logits per sample, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    return logits


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    # Shifted log-sum-exp keeps log-probabilities exact for extreme logits.
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _smoothed_targets(targets: np.ndarray, smoothing: float) -> np.ndarray:
    q = np.full(targets.shape + (2,), smoothing, dtype=np.float64)
    np.put_along_axis(q, targets[..., None], 1.0 - smoothing, axis=-1)
    return q


def _loss_terms(logits: np.ndarray, targets: np.ndarray, cfg: FocalConfig):
    """Shared forward pass; returns (q, p, logp, one_minus_p, focal_factor)."""
    logp = _log_softmax(logits)
    p = np.exp(logp)
    # -expm1(logp) computes 1 - p without cancellation as p -> 1; the maximum
    # clears the -0.0 produced when a log-probability is exactly zero.
    one_minus_p = np.maximum(-np.expm1(logp), 0.0)
    q = _smoothed_targets(targets, cfg.smoothing)
    omp_f = np.minimum(one_minus_p, 1.0 - _P_FLOOR)
    focal = omp_f ** cfg.gamma if cfg.gamma != 0.0 else np.ones_like(p)
    return q, p, logp, one_minus_p, focal


def focal_loss_batch(logits: np.ndarray, targets: np.ndarray, cfg: FocalConfig) -> float:
    """Mean focal loss over a batch of (N, 2) logits and (N,) class indices."""
    logits = _check_logits(logits)
    targets = np.asarray(targets, dtype=np.int64)
    alpha = np.asarray(cfg.alpha, dtype=np.float64)
    q, _, logp, _, focal = _loss_terms(logits, targets, cfg)
    per_sample = np.sum(q * alpha * focal * (-logp), axis=-1)
    return float(np.mean(per_sample))


def focal_loss(logits: np.ndarray, target: int, cfg: FocalConfig) -> float:
    """Focal loss of a single 2-logit prediction against a class index."""
    if target not in (0, 1):
        raise ValueError(f"target must be 0 or 1, got {target}")
    return focal_loss_batch(np.asarray(logits)[None, :], np.array([target]), cfg)


def focal_loss_grad_batch(logits: np.ndarray, targets: np.ndarray, cfg: FocalConfig) -> np.ndarray:
    """Gradient of the mean batch loss with respect to every logit, shape (N, 2)."""
    logits = _check_logits(logits)
    targets = np.asarray(targets, dtype=np.int64)
    alpha = np.asarray(cfg.alpha, dtype=np.float64)
    q, p, logp, one_minus_p, focal = _loss_terms(logits, targets, cfg)
    # d/dp [(1-p)^g (-log p)] * p  =  g*p*(1-p)^(g-1)*log(p) - (1-p)^g
    # Rewrite the first term as g*p*(1-p)^g * (log(p)/(1-p)); the ratio tends
    # to -1 as p -> 1, which keeps the expression finite at the boundary.
    if cfg.gamma != 0.0:
        ratio = np.where(one_minus_p > 0, logp / np.where(one_minus_p > 0, one_minus_p, 1.0), -1.0)
        h = cfg.gamma * p * focal * ratio - focal
    else:
        h = -focal
    weighted = q * alpha * h
    grad = weighted - p * weighted.sum(axis=-1, keepdims=True)
    return grad / logits.shape[0]


def focal_loss_grad(logits: np.ndarray, target: int, cfg: FocalConfig) -> np.ndarray:
    """Exact gradient of ``focal_loss`` with respect to the two logits."""
    if target not in (0, 1):
        raise ValueError(f"target must be 0 or 1, got {target}")
    return focal_loss_grad_batch(np.asarray(logits)[None, :], np.array([target]), cfg)[0]
