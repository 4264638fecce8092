"""The denoising chain as a finite-horizon decision process.

Process time k runs 0..T-1 while diffusion time t runs T..1; the two clocks
are related by t = T - k, and that conversion lives here and nowhere else.
At step k the state is (class, k, x_{T-k}), the action is the next image
x_{T-k-1}, and the policy density is the reverse step's Gaussian
N(mu_theta(x_t, t, c), sigma_t^2 I).

Segments are windows into one trajectory; their states and actions are
views, never copies, so slicing a chain into sub-segments is free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nd import ParamSet, Tape
from .diffusion.model import ModelConfig, guided_eps
from .diffusion.sampling import Trajectory
from .diffusion.schedule import Schedule

LOG_2PI = float(np.log(2.0 * np.pi))


def mdp_to_diffusion(k: int, n_steps: int) -> int:
    if not 0 <= k < n_steps:
        raise ValueError(f"process step {k} outside 0..{n_steps - 1}")
    return n_steps - k


def diffusion_to_mdp(t: int, n_steps: int) -> int:
    if not 1 <= t <= n_steps:
        raise ValueError(f"diffusion time {t} outside 1..{n_steps}")
    return n_steps - t


@dataclass(frozen=True)
class State:
    class_id: int
    k: int               # process time, 0-based
    x: np.ndarray        # image at diffusion time T-k, flat


@dataclass(frozen=True)
class Action:
    x: np.ndarray        # image at diffusion time T-k-1, flat


@dataclass(frozen=True)
class Segment:
    """Steps k in [start, stop) of one chain."""

    traj: Trajectory
    start: int
    stop: int

    def __len__(self) -> int:
        return self.stop - self.start

    def __post_init__(self):
        T = self.traj.n_steps
        if not (0 <= self.start < self.stop <= T):
            raise ValueError(f"segment [{self.start},{self.stop}) outside 0..{T}")

    def state(self, k: int) -> State:
        self._check(k)
        t = mdp_to_diffusion(k, self.traj.n_steps)
        return State(self.traj.class_id, k, self.traj.x[t])

    def action(self, k: int) -> Action:
        self._check(k)
        t = mdp_to_diffusion(k, self.traj.n_steps)
        return Action(self.traj.x[t - 1])

    def steps(self):
        for k in range(self.start, self.stop):
            yield self.state(k), self.action(k)

    def sub_segments(self, n: int) -> list["Segment"]:
        """n contiguous pieces covering this segment (sizes differ by <= 1)."""
        total = len(self)
        if not 1 <= n <= total:
            raise ValueError(f"cannot split {total} steps into {n} pieces")
        bounds = np.linspace(self.start, self.stop, n + 1).round().astype(int)
        return [Segment(self.traj, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def _check(self, k: int) -> None:
        if not self.start <= k < self.stop:
            raise IndexError(f"step {k} outside [{self.start},{self.stop})")


def trajectory_to_segment(traj: Trajectory) -> Segment:
    return Segment(traj, 0, traj.n_steps)


def log_policy(
    params: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    state: State,
    action: Action,
    guidance_w: float,
    tape: Tape | None = None,
):
    """Log density of the action under the reverse step at this state.

    Returns a Node when taped (gradient flows to params only), else a float.
    """
    t = mdp_to_diffusion(state.k, sched.T)
    tp = tape if tape is not None else Tape()
    eps = guided_eps(params, mcfg, state.x, t, state.class_id, guidance_w, sched, tp)
    x_row = state.x.reshape(1, -1)
    mu = tp.lincomb(sched.c_xt[t], x_row, -sched.c_eps[t], eps)
    sq = tp.sqsum_diff(mu, action.x.reshape(1, -1))
    dim = mcfg.dim
    sigma = sched.sigma[t]
    shift = -0.5 * dim * LOG_2PI - dim * sched.log_sigma[t]
    node = tp.s_affine(sq, -1.0 / (2.0 * sigma * sigma), shift)
    return node if tape is not None else node.item()


def step_kl(
    params_a: ParamSet,
    params_b: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    state: State,
    guidance_w: float,
) -> float:
    """KL between the two policies at one state: ||mu_a - mu_b||^2 / (2 sigma_t^2).

    Both policies share sigma_t, so the variance terms cancel.
    """
    t = mdp_to_diffusion(state.k, sched.T)
    ea = guided_eps(params_a, mcfg, state.x, t, state.class_id, guidance_w, sched, None)
    eb = guided_eps(params_b, mcfg, state.x, t, state.class_id, guidance_w, sched, None)
    diff = (sched.c_eps[t] * (ea - eb)).ravel()
    return float(diff @ diff) / (2.0 * sched.sigma[t] ** 2)
