"""Supervised pretraining of the denoiser.

Each step draws clean shapes, diffuses them to random times, and regresses
the model's implied reverse-step mean onto the exact forward-posterior mean
(mean squared error).  Class labels are dropped to the null class with
probability p_uncond so the same network also learns the unconditional
distribution needed for guidance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nd import AdamConfig, AdamState, ParamSet, Tape, adam_step
from ..seeds import rng_for
from .model import ModelConfig, denoiser_rows
from .schedule import Schedule
from .shapes import sample_batch


@dataclass
class PretrainConfig:
    n_steps: int = 4000
    batch_size: int = 64
    p_uncond: float = 0.1
    lr: float = 3e-4
    log_every: int = 200


def pretrain_loss(
    params: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    x0: np.ndarray,
    classes: np.ndarray,
    t: np.ndarray,
    eps: np.ndarray,
    tape: Tape,
):
    """Mean squared error between implied and exact reverse-step means."""
    xt = sched.marginal(x0, eps, t)
    target = sched.posterior_mean(x0, xt, t)
    eps_hat = denoiser_rows(params, mcfg, xt, t, classes, sched, tape)
    mu = tape.lincomb(sched.c_xt[t], xt, -sched.c_eps[t], eps_hat)
    sq = tape.sqsum_diff(mu, target)
    return tape.s_affine(sq, 1.0 / (x0.shape[0] * x0.shape[1]))


def pretrain(
    params: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    cfg: PretrainConfig,
    master_seed: int,
    progress=None,
) -> list[float]:
    """Train in place; returns the per-log-window mean loss history."""
    adam_cfg = AdamConfig(lr=cfg.lr)
    state = AdamState.for_params(params)
    history: list[float] = []
    window: list[float] = []
    for step in range(cfg.n_steps):
        rng = rng_for(master_seed, "pretrain", step)
        x0, classes = sample_batch(rng, cfg.batch_size, mcfg.side)
        drop = rng.uniform(size=cfg.batch_size) < cfg.p_uncond
        classes = np.where(drop, mcfg.null_class, classes)
        t = rng.integers(1, sched.T + 1, size=cfg.batch_size)
        eps = rng.standard_normal(size=x0.shape)

        tape = Tape()
        loss = pretrain_loss(params, mcfg, sched, x0, classes, t, eps, tape)
        tape.backward(loss)
        adam_step(params, tape.grads(), state, adam_cfg)

        window.append(loss.item())
        if (step + 1) % cfg.log_every == 0:
            history.append(float(np.mean(window)))
            window.clear()
            if progress is not None:
                progress(step + 1, history[-1])
    if window:
        history.append(float(np.mean(window)))
    return history
