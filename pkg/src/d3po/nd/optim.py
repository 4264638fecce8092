"""Adam with decoupled weight decay and global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from .tensor import ParamSet


@dataclass
class AdamConfig:
    lr: float = 3e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    clip_norm: float = 1.0  # 0 disables clipping


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: ParamSet) -> "AdamState":
        state = cls()
        for name, t in params.items():
            state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        return state


def global_grad_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += kernels.sqsum(g)
    return float(np.sqrt(total))


def clip_grads_(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint norm is at most max_norm.

    Returns the pre-clip norm.
    """
    norm = global_grad_norm(grads)
    if max_norm > 0 and norm > max_norm:
        s = max_norm / norm
        for g in grads.values():
            kernels.scale_inplace(g, s)
    return norm


def adam_step(
    params: ParamSet,
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: AdamConfig,
) -> float:
    """One update over every parameter; returns the pre-clip gradient norm."""
    params.require_trainable("adam_step")
    norm = clip_grads_(grads, cfg.clip_norm)
    state.step += 1
    bc1 = 1.0 - cfg.beta1 ** state.step
    bc2 = 1.0 - cfg.beta2 ** state.step
    for name, t in params.items():
        g = grads[name]
        if g.shape != t.data.shape:
            raise ValueError(f"gradient shape {g.shape} != param {name} shape {t.data.shape}")
        kernels.adam_update(
            t.data, g, state.m[name], state.v[name],
            cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, bc1, bc2, cfg.weight_decay,
        )
    return norm
