"""Schedule-free Adam-style optimizer, plus a plain-Adam fallback for ablations.

The schedule-free scheme keeps two iterates: a fast base iterate ``z`` updated
with Adam-normalized steps, and a uniformly averaged iterate ``x`` used for
evaluation. Gradients are queried at the interpolation
``y = (1 - beta1) * z + beta1 * x``, which replaces both first-moment momentum
and learning-rate warmup/decay.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

GradFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SfAdamState:
    """Immutable optimizer state; steps return a new state.

    ``eta`` may be a scalar or a per-parameter array (parameter groups with
    different learning rates are expressed element-wise). ``m`` holds the
    first-moment accumulator used only by ``plain_adam_step``.
    """

    z: np.ndarray
    x: np.ndarray
    v: np.ndarray
    m: np.ndarray
    t: int
    eta: float | np.ndarray
    beta1: float
    beta2: float
    eps: float


def sf_adam_init(
    params: np.ndarray,
    eta: float | np.ndarray,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> SfAdamState:
    """Fresh state with z = x = params, zero moments, step counter zero."""
    params = np.asarray(params, dtype=np.float64)
    eta_arr = np.asarray(eta, dtype=np.float64)
    if not np.all(eta_arr > 0):
        raise ValueError("learning rate must be positive")
    if eta_arr.ndim > 0 and eta_arr.shape != params.shape:
        raise ValueError(f"eta shape {eta_arr.shape} does not match params {params.shape}")
    if not 0 <= beta1 < 1 or not 0 <= beta2 < 1:
        raise ValueError("beta1 and beta2 must lie in [0, 1)")
    eta_out = float(eta) if eta_arr.ndim == 0 else eta_arr
    zeros = np.zeros_like(params)
    return SfAdamState(
        z=params.copy(), x=params.copy(), v=zeros.copy(), m=zeros.copy(),
        t=0, eta=eta_out, beta1=beta1, beta2=beta2, eps=eps,
    )


def eval_point(state: SfAdamState) -> np.ndarray:
    """The averaged iterate x; model evaluation and final weights use this."""
    return state.x


def _checked_grad(grad_at: GradFn, point: np.ndarray) -> np.ndarray:
    g = np.asarray(grad_at(point), dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite gradient; step rejected")
    return g


def sf_adam_step(state: SfAdamState, grad_at: GradFn) -> SfAdamState:
    """One schedule-free step; on a non-finite gradient the state is unchanged
    and a ValueError is raised."""
    y = (1.0 - state.beta1) * state.z + state.beta1 * state.x
    g = _checked_grad(grad_at, y)
    t_new = state.t + 1
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    vhat = v / (1.0 - state.beta2 ** t_new)
    z = state.z - state.eta * g / (np.sqrt(vhat) + state.eps)
    c = 1.0 / t_new
    x = (1.0 - c) * state.x + c * z
    return replace(state, z=z, x=x, v=v, t=t_new)


def plain_adam_step(state: SfAdamState, grad_at: GradFn) -> SfAdamState:
    """Standard Adam with bias-corrected moments; x tracks z so that
    ``eval_point`` is valid for either optimizer."""
    g = _checked_grad(grad_at, state.z)
    t_new = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    mhat = m / (1.0 - state.beta1 ** t_new)
    vhat = v / (1.0 - state.beta2 ** t_new)
    z = state.z - state.eta * mhat / (np.sqrt(vhat) + state.eps)
    return replace(state, z=z, x=z.copy(), v=v, m=m, t=t_new)


STEP_FNS = {
    "schedule_free": sf_adam_step,
    "adam": plain_adam_step,
}
