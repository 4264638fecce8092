"""Reverse-process sampling with replayable randomness.

A Trajectory stores every intermediate image and the explicit per-step noise
seeds that produced it, so the exact chain can be regenerated bit for bit
from the same parameters — the foundation for auditing and for evaluating
densities on previously sampled chains.

Sampling is deliberately batch-1 per chain: each row's arithmetic is then
independent of anything else in flight, which keeps replays exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nd import ParamSet
from ..seeds import derive_seed, rng_for
from .model import ModelConfig, guided_eps
from .schedule import Schedule


@dataclass
class Trajectory:
    """One reverse chain.  x[t] is the image (flat, length dim) at diffusion
    time t, so x[T] is the initial noise and x[0] the final sample."""

    class_id: int
    guidance_w: float
    init_seed: int
    step_seeds: list[int]          # noise seeds for t = T, T-1, ..., 1
    x: np.ndarray                  # (T+1, dim)

    @property
    def n_steps(self) -> int:
        return self.x.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def final_image(self, side: int) -> np.ndarray:
        return self.x[0].reshape(side, side)


def reverse_step_mean(
    params: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    x_t: np.ndarray,
    t: int,
    class_id: int,
    w: float,
) -> np.ndarray:
    """Mean of p(x_{t-1} | x_t, c): c_xt[t]*x_t - c_eps[t]*eps_hat."""
    eps = guided_eps(params, mcfg, x_t, t, class_id, w, sched, tape=None)
    return sched.c_xt[t] * x_t.reshape(1, -1) - sched.c_eps[t] * eps


def sample_trajectory(
    params: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    class_id: int,
    guidance_w: float,
    master: int,
    stream: str,
    *indices: int,
) -> Trajectory:
    """Sample one chain; all randomness derived from (master, stream, indices)."""
    T, dim = sched.T, mcfg.dim
    init_seed = derive_seed(master, stream, *indices, T + 1)
    step_seeds = [derive_seed(master, stream, *indices, t) for t in range(T, 0, -1)]
    return _run_chain(params, mcfg, sched, class_id, guidance_w, init_seed, step_seeds)


def sample_pair(
    params: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    class_id: int,
    guidance_w: float,
    master: int,
    stream: str,
    *indices: int,
) -> tuple[Trajectory, Trajectory]:
    """Two chains from one shared x_T, with independent per-step noise.

    Both trajectories record the same init seed, so each replays exactly."""
    T = sched.T
    init_seed = derive_seed(master, stream, *indices, T + 1)
    seeds = [
        [derive_seed(master, stream, *indices, side, t) for t in range(T, 0, -1)]
        for side in (0, 1)
    ]
    return tuple(
        _run_chain(params, mcfg, sched, class_id, guidance_w, init_seed, s)
        for s in seeds
    )


def replay_trajectory(
    params: ParamSet, mcfg: ModelConfig, sched: Schedule, traj: Trajectory
) -> Trajectory:
    """Regenerate a chain from its stored seeds; bitwise identical when the
    parameters and configuration match the original run."""
    return _run_chain(
        params, mcfg, sched, traj.class_id, traj.guidance_w, traj.init_seed, traj.step_seeds
    )


def _run_chain(params, mcfg, sched, class_id, guidance_w, init_seed, step_seeds) -> Trajectory:
    T, dim = sched.T, mcfg.dim
    if len(step_seeds) != T:
        raise ValueError(f"need {T} step seeds, got {len(step_seeds)}")
    x = np.empty((T + 1, dim))
    x[T] = np.random.Generator(np.random.PCG64(init_seed)).standard_normal(dim)
    for i, t in enumerate(range(T, 0, -1)):
        mu = reverse_step_mean(params, mcfg, sched, x[t], t, class_id, guidance_w)[0]
        z = np.random.Generator(np.random.PCG64(step_seeds[i])).standard_normal(dim)
        x[t - 1] = mu + sched.sigma[t] * z
    return Trajectory(
        class_id=class_id,
        guidance_w=guidance_w,
        init_seed=init_seed,
        step_seeds=list(step_seeds),
        x=x,
    )


def trajectory_to_tensors(traj: Trajectory) -> list[tuple[str, np.ndarray]]:
    """Container serialization: the chain plus its seeds as tensors."""
    seeds = np.asarray([traj.init_seed, *traj.step_seeds], dtype=np.uint64)
    # seeds are 64-bit; 16-bit limbs survive an f32 payload exactly
    parts = np.stack(
        [(seeds >> 48) & 0xFFFF, (seeds >> 32) & 0xFFFF, (seeds >> 16) & 0xFFFF, seeds & 0xFFFF]
    ).astype(np.float64)
    return [("x", traj.x), ("seed_parts", parts)]


def trajectory_from_tensors(meta: dict, tensors: dict[str, np.ndarray]) -> Trajectory:
    p = tensors["seed_parts"].astype(np.uint64)
    seeds = (p[0] << 48) | (p[1] << 32) | (p[2] << 16) | p[3]
    return Trajectory(
        class_id=int(meta["class_id"]),
        guidance_w=float(meta["guidance_w"]),
        init_seed=int(seeds[0]),
        step_seeds=[int(s) for s in seeds[1:]],
        x=tensors["x"],
    )
