"""Preference fine-tuning of the denoising chain, step by step.

Each labeled pair contributes one loss term per chain step: with z the
temperature-scaled difference of policy log-ratios between the preferred and
rejected steps,

    z = beta * [ (log pi_theta - log pi_ref)(winner step)
               - (log pi_theta - log pi_ref)(loser step) ]
    loss = softplus(-z)

Gradients flow only through pi_theta; the reference policy is a frozen
snapshot of the model that generated the pairs.  Ties train nothing — the
pair is skipped before any compute, so an all-tie epoch leaves parameters
bitwise untouched.

A tape is built per (pair, step) and dropped immediately, so retained-graph
size is independent of the chain length; the step loop also means one pair
yields T gradient updates rather than one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion.model import ModelConfig
from .diffusion.sampling import Trajectory, sample_pair
from .diffusion.schedule import Schedule
from .mdp import Segment, log_policy, step_kl, trajectory_to_segment
from .nd import AdamConfig, AdamState, ParamSet, Tape, adam_step


@dataclass(frozen=True)
class FinetuneConfig:
    beta: float = 0.1            # preference temperature
    guidance_w: float = 5.0
    per_step: bool = True        # False: one bandit-style update per pair
    kl_probe_pairs: int = 2      # pairs per epoch probed for policy drift
    adam: AdamConfig = field(default_factory=AdamConfig)


@dataclass
class LabeledPair:
    pair_id: str
    traj_a: Trajectory
    traj_b: Trajectory
    choice: str                  # "a" | "b" | "tie"


@dataclass
class EpochStats:
    n_pairs: int = 0
    n_ties: int = 0
    loss_terms: int = 0
    mean_loss: float = 0.0
    max_tape_nodes: int = 0
    mean_grad_norm: float = 0.0
    mean_kl: float = 0.0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def generate_pair(
    params: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    class_id: int,
    guidance_w: float,
    master: int,
    epoch: int,
    pair_idx: int,
) -> tuple[Trajectory, Trajectory]:
    """Two chains sharing one initial noise, with independent step noise."""
    return sample_pair(
        params, mcfg, sched, class_id, guidance_w, master, "pair", epoch, pair_idx
    )


def step_loss(
    theta: ParamSet,
    ref: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    seg_w: Segment,
    seg_l: Segment,
    k: int,
    beta: float,
    guidance_w: float,
    tape: Tape,
):
    """Per-step preference loss node at process step k."""
    lw = log_policy(theta, mcfg, sched, seg_w.state(k), seg_w.action(k), guidance_w, tape)
    ll = log_policy(theta, mcfg, sched, seg_l.state(k), seg_l.action(k), guidance_w, tape)
    lw_ref = log_policy(ref, mcfg, sched, seg_w.state(k), seg_w.action(k), guidance_w)
    ll_ref = log_policy(ref, mcfg, sched, seg_l.state(k), seg_l.action(k), guidance_w)
    z = tape.s_affine(tape.s_sub(lw, ll), beta, -beta * (lw_ref - ll_ref))
    return tape.s_softplus(tape.s_affine(z, -1.0))


def chain_loss(
    theta: ParamSet,
    ref: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    seg_w: Segment,
    seg_l: Segment,
    beta: float,
    guidance_w: float,
    tape: Tape,
):
    """Whole-chain (bandit) variant: one loss from summed log-ratios."""
    zw = zl = 0.0
    acc = None
    for k in range(seg_w.start, seg_w.stop):
        lw = log_policy(theta, mcfg, sched, seg_w.state(k), seg_w.action(k), guidance_w, tape)
        ll = log_policy(theta, mcfg, sched, seg_l.state(k), seg_l.action(k), guidance_w, tape)
        zw += log_policy(ref, mcfg, sched, seg_w.state(k), seg_w.action(k), guidance_w)
        zl += log_policy(ref, mcfg, sched, seg_l.state(k), seg_l.action(k), guidance_w)
        d = tape.s_sub(lw, ll)
        acc = d if acc is None else tape.s_add(acc, d)
    z = tape.s_affine(acc, beta, -beta * (zw - zl))
    return tape.s_softplus(tape.s_affine(z, -1.0))


def winner_loser(pair: LabeledPair) -> tuple[Segment, Segment] | None:
    if pair.choice == "tie":
        return None
    sa, sb = trajectory_to_segment(pair.traj_a), trajectory_to_segment(pair.traj_b)
    return (sa, sb) if pair.choice == "a" else (sb, sa)


def finetune_epoch(
    theta: ParamSet,
    ref: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    pairs: list[LabeledPair],
    cfg: FinetuneConfig,
    opt_state: AdamState,
) -> EpochStats:
    """Train theta on one epoch of labeled pairs; returns aggregate stats."""
    stats = EpochStats(n_pairs=len(pairs))
    losses: list[float] = []
    norms: list[float] = []
    for pair in pairs:
        wl = winner_loser(pair)
        if wl is None:
            stats.n_ties += 1
            continue
        seg_w, seg_l = wl
        if cfg.per_step:
            for k in range(seg_w.start, seg_w.stop):
                tape = Tape()
                loss = step_loss(
                    theta, ref, mcfg, sched, seg_w, seg_l, k, cfg.beta, cfg.guidance_w, tape
                )
                tape.backward(loss)
                norms.append(adam_step(theta, tape.grads(), opt_state, cfg.adam))
                losses.append(loss.item())
                stats.loss_terms += 1
                stats.max_tape_nodes = max(stats.max_tape_nodes, len(tape))
        else:
            tape = Tape()
            loss = chain_loss(
                theta, ref, mcfg, sched, seg_w, seg_l, cfg.beta, cfg.guidance_w, tape
            )
            tape.backward(loss)
            norms.append(adam_step(theta, tape.grads(), opt_state, cfg.adam))
            losses.append(loss.item())
            stats.loss_terms += 1
            stats.max_tape_nodes = max(stats.max_tape_nodes, len(tape))
    stats.mean_loss = float(np.mean(losses)) if losses else 0.0
    stats.mean_grad_norm = float(np.mean(norms)) if norms else 0.0
    stats.mean_kl = _probe_kl(theta, ref, mcfg, sched, pairs, cfg)
    return stats


def _probe_kl(theta, ref, mcfg, sched, pairs, cfg) -> float:
    """Mean per-step divergence from the reference on a few probe chains."""
    if cfg.kl_probe_pairs <= 0 or not pairs:
        return 0.0
    vals = []
    for pair in pairs[: cfg.kl_probe_pairs]:
        seg = trajectory_to_segment(pair.traj_a)
        for k in range(len(seg)):
            vals.append(step_kl(theta, ref, mcfg, sched, seg.state(k), cfg.guidance_w))
    return float(np.mean(vals))


def advance_reference(theta: ParamSet) -> ParamSet:
    """Snapshot the current policy as the next frozen reference."""
    return theta.freeze()


def reward_weighted_epoch(
    theta: ParamSet,
    mcfg: ModelConfig,
    sched: Schedule,
    segments: list[Segment],
    rewards: np.ndarray,
    cfg: FinetuneConfig,
    opt_state: AdamState,
    batch_size: int = 8,
    tau: float = 1.0,
) -> EpochStats:
    """Reward-weighted likelihood baseline: no pairwise structure, no
    reference — chains are reweighted by softmax(reward/tau) within a batch
    and their step log-likelihoods maximized."""
    stats = EpochStats(n_pairs=len(segments))
    losses: list[float] = []
    norms: list[float] = []
    rewards = np.asarray(rewards, dtype=np.float64)
    for lo in range(0, len(segments), batch_size):
        batch = segments[lo : lo + batch_size]
        r = rewards[lo : lo + batch_size] / tau
        wts = np.exp(r - r.max())
        wts /= wts.sum()
        T = len(batch[0])
        for k in range(T):
            tape = Tape()
            acc = None
            for seg, wt in zip(batch, wts):
                lp = log_policy(
                    theta, mcfg, sched, seg.state(k), seg.action(k), cfg.guidance_w, tape
                )
                term = tape.s_affine(lp, -float(wt))
                acc = term if acc is None else tape.s_add(acc, term)
            tape.backward(acc)
            norms.append(adam_step(theta, tape.grads(), opt_state, cfg.adam))
            losses.append(acc.item())
            stats.loss_terms += 1
            stats.max_tape_nodes = max(stats.max_tape_nodes, len(tape))
    stats.mean_loss = float(np.mean(losses)) if losses else 0.0
    stats.mean_grad_norm = float(np.mean(norms)) if norms else 0.0
    return stats
