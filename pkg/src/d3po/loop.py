"""End-to-end experiment orchestration.

Everything here is deterministic given the run configuration: random streams
are derived per (purpose, epoch, index), so two runs with the same config
produce bitwise-identical histories, and sweeps that share a master seed see
exactly the same sampling randomness in every arm.

An epoch of preference training:
  1. snapshot the current policy as the frozen reference (unless pinned),
  2. sample on-policy pairs, one class per pair in round-robin,
  3. label each pair with the configured judge,
  4. run the per-step preference updates.
The pair images scored during (3) double as the epoch's quality monitor —
they are exactly the policy's on-policy samples at the epoch boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .diffusion import (
    ModelConfig,
    Schedule,
    ScheduleConfig,
    init_model,
    pretrain as pretrain_run,
    sample_pair,
    sample_trajectory,
)
from .finetune import (
    LabeledPair,
    advance_reference,
    finetune_epoch,
    generate_pair,
    reward_weighted_epoch,
    step_loss,
)
from .mdp import step_kl, trajectory_to_segment
from .nd import AdamState, ParamSet, Tape, check_gradients
from .preference import label_from_objective, score_image
from .seeds import derive_seed, rng_for
from .theory import VerificationReport, bt_nll, implied_chain_reward, spearman


def build_pretrained(cfg: RunConfig, progress=None) -> tuple[ParamSet, list[float]]:
    params = init_model(rng_for(cfg.experiment.master_seed, "init"), cfg.model)
    sched = Schedule(cfg.schedule)
    history = pretrain_run(params, cfg.model, sched, cfg.pretrain,
                           cfg.experiment.master_seed, progress)
    return params, history


@dataclass
class EpochRecord:
    epoch: int
    mean_score: float
    stats: dict

    def as_dict(self) -> dict:
        return {"epoch": self.epoch, "mean_score": self.mean_score, **self.stats}


@dataclass
class RunResult:
    epoch_scores: list[float]          # on-policy sample quality at each epoch start
    final_score: float                 # fresh samples from the final policy
    records: list[EpochRecord]
    params: ParamSet

    @property
    def pretrain_score(self) -> float:
        return self.epoch_scores[0]


def eval_mean_score(
    params: ParamSet, cfg: RunConfig, objective: str, n: int, master: int, stream: str
) -> float:
    sched = Schedule(cfg.schedule)
    scores = []
    for i in range(n):
        cls = i % cfg.model.n_classes
        traj = sample_trajectory(
            params, cfg.model, sched, cls, cfg.finetune.guidance_w, master, stream, i
        )
        scores.append(score_image(objective, traj.final_image(cfg.model.side), cls))
    return float(np.mean(scores))


def oracle_finetune_run(
    pre: ParamSet,
    cfg: RunConfig,
    seed_offset: int = 0,
    progress=None,
) -> RunResult:
    """Fine-tune against the configured programmatic judge."""
    exp = cfg.experiment
    master = derive_seed(exp.master_seed, "ft-run", seed_offset)
    sched = Schedule(cfg.schedule)
    theta = pre.copy()
    opt = AdamState.for_params(theta)
    ref = advance_reference(theta)
    records: list[EpochRecord] = []
    epoch_scores: list[float] = []
    for epoch in range(exp.n_epochs):
        if not exp.fixed_reference:
            ref = advance_reference(theta)
        pairs: list[LabeledPair] = []
        scores: list[float] = []
        for i in range(exp.pairs_per_epoch):
            cls = i % cfg.model.n_classes
            ta, tb = generate_pair(
                theta, cfg.model, sched, cls, cfg.finetune.guidance_w, master, epoch, i
            )
            choice, sa, sb = label_from_objective(
                exp.objective,
                ta.final_image(cfg.model.side),
                tb.final_image(cfg.model.side),
                cls,
            )
            pairs.append(LabeledPair(f"{epoch:04d}-{i:04d}", ta, tb, choice))
            scores.extend((sa, sb))
        stats = finetune_epoch(theta, ref, cfg.model, sched, pairs, cfg.finetune, opt)
        rec = EpochRecord(epoch, float(np.mean(scores)), stats.as_dict())
        records.append(rec)
        epoch_scores.append(rec.mean_score)
        if progress is not None:
            progress(rec)
    final = eval_mean_score(theta, cfg, exp.objective, exp.eval_samples, master, "final-eval")
    return RunResult(epoch_scores, final, records, theta)


def reward_weighted_run(
    pre: ParamSet,
    cfg: RunConfig,
    seed_offset: int = 0,
    batch_size: int = 8,
    tau: float = 1.0,
    progress=None,
) -> RunResult:
    """Baseline: same sampling budget, raw judge scores as weights."""
    exp = cfg.experiment
    master = derive_seed(exp.master_seed, "rw-run", seed_offset)
    sched = Schedule(cfg.schedule)
    theta = pre.copy()
    opt = AdamState.for_params(theta)
    records: list[EpochRecord] = []
    epoch_scores: list[float] = []
    n_chains = 2 * exp.pairs_per_epoch
    for epoch in range(exp.n_epochs):
        segs, scores = [], []
        for i in range(n_chains):
            cls = (i // 2) % cfg.model.n_classes
            traj = sample_trajectory(
                theta, cfg.model, sched, cls, cfg.finetune.guidance_w,
                master, "rw", epoch, i,
            )
            segs.append(trajectory_to_segment(traj))
            scores.append(score_image(exp.objective, traj.final_image(cfg.model.side), cls))
        rewards = np.asarray(scores)
        spread = rewards.std()
        if spread > 0:
            rewards = (rewards - rewards.mean()) / spread
        stats = reward_weighted_epoch(
            theta, cfg.model, sched, segs, rewards, cfg.finetune, opt,
            batch_size=batch_size, tau=tau,
        )
        rec = EpochRecord(epoch, float(np.mean(scores)), stats.as_dict())
        records.append(rec)
        epoch_scores.append(rec.mean_score)
        if progress is not None:
            progress(rec)
    final = eval_mean_score(theta, cfg, exp.objective, exp.eval_samples, master, "final-eval")
    return RunResult(epoch_scores, final, records, theta)


def implied_reward_eval(
    theta: ParamSet,
    ref: ParamSet,
    cfg: RunConfig,
    n_pairs: int,
    master: int,
) -> dict:
    """Held-out check that beta*log(pi/pi_ref) summed over a chain ranks
    samples the way the judge does.

    Pairs are sampled from the tuned policy itself: the log-ratio score is
    only grounded on states the policy actually visits, so the probe has to
    be on-policy.  (Scoring chains drawn from the frozen reference instead
    measures drift at states the tuned model never reaches, which is noise.)
    """
    sched = Schedule(cfg.schedule)
    exp = cfg.experiment
    w = cfg.finetune.guidance_w
    implied, oracle = [], []
    nll_w, nll_l = [], []
    for i in range(n_pairs):
        cls = i % cfg.model.n_classes
        ta, tb = generate_pair(theta, cfg.model, sched, cls, w, master, 10_000, i)
        ra = implied_chain_reward(theta, ref, cfg.model, sched,
                                  trajectory_to_segment(ta), cfg.finetune.beta, w)
        rb = implied_chain_reward(theta, ref, cfg.model, sched,
                                  trajectory_to_segment(tb), cfg.finetune.beta, w)
        sa = score_image(exp.objective, ta.final_image(cfg.model.side), cls)
        sb = score_image(exp.objective, tb.final_image(cfg.model.side), cls)
        implied.extend((ra, rb))
        oracle.extend((sa, sb))
        if sa > sb:
            nll_w.append(ra)
            nll_l.append(rb)
        elif sb > sa:
            nll_w.append(rb)
            nll_l.append(ra)
    return {
        "spearman": float(spearman(np.asarray(implied), np.asarray(oracle))),
        "bt_nll": float(bt_nll(np.asarray(nll_w), np.asarray(nll_l))) if nll_w else float("nan"),
        "n_pairs": n_pairs,
        "n_decisive": len(nll_w),
    }


def mean_policy_divergence(
    theta: ParamSet, ref: ParamSet, cfg: RunConfig, n_chains: int, master: int
) -> float:
    """Mean per-step KL from the reference along the policy's own chains."""
    sched = Schedule(cfg.schedule)
    vals = []
    for i in range(n_chains):
        cls = i % cfg.model.n_classes
        traj = sample_trajectory(
            theta, cfg.model, sched, cls, cfg.finetune.guidance_w, master, "kl-probe", i
        )
        seg = trajectory_to_segment(traj)
        for k in range(len(seg)):
            vals.append(
                step_kl(theta, ref, cfg.model, sched, seg.state(k), cfg.finetune.guidance_w)
            )
    return float(np.mean(vals))


def gradient_fidelity_report(tol: float = 1e-4) -> VerificationReport:
    """Finite-difference check of the per-step preference loss gradient.

    Runs on a deliberately small network so central differences stay cheap,
    probing the first, a middle, and the final process step (the last one has
    the floored, tightest step variance and is the numerically hardest).
    """
    mcfg = ModelConfig(side=6, time_dim=8, class_dim=4, hidden=(16,))
    sched = Schedule(ScheduleConfig(n_steps=6))
    theta = init_model(np.random.default_rng(321), mcfg)
    ref = advance_reference(init_model(np.random.default_rng(322), mcfg))
    ta, tb = sample_pair(theta, mcfg, sched, 1, 1.5, 999, "gradcheck", 0)
    seg_w, seg_l = trajectory_to_segment(ta), trajectory_to_segment(tb)

    lines = []
    worst = 0.0
    for k in (0, sched.T // 2, sched.T - 1):
        def loss_fn(p: ParamSet, k=k) -> float:
            tape = Tape()
            node = step_loss(p, ref, mcfg, sched, seg_w, seg_l, k, 0.1, 1.5, tape)
            tape.backward(node)
            loss_fn.last = tape.grads()
            return node.item()

        loss_fn(theta)
        err = check_gradients(loss_fn, theta, loss_fn.last,
                              np.random.default_rng(100 + k), n_coords=3)
        worst = max(worst, err)
        lines.append(f"step k={k}: worst relative error {err:.3e}")
    lines.append(f"worst overall {worst:.3e} (tolerance {tol:g})")
    return VerificationReport(
        "preference-loss gradient fidelity",
        worst <= tol,
        lines,
        {"worst_rel_err": worst, "tol": tol},
    )
