"""Acceptance gates: every shipped guarantee, measured at its stated tolerance.

Each test prints one pass/fail line in the "acceptance criteria" section of
the pytest summary (see conftest.record_criterion).  The experiment-scale
checks (oracle improvement, implicit-reward ranking, temperature sensitivity,
baseline parity) run the real training loops at full configured budget and
cache their artifacts under the test cache; delete .testcache to re-measure
from scratch.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from conftest import cache_root, cached_json, cached_params, config_digest, record_criterion
from d3po.checkpoint import container_bytes, load_params, save_params
from d3po.config import ExperimentConfig, RunConfig, apply_overrides
from d3po.diffusion import (
    ModelConfig,
    PretrainConfig,
    Schedule,
    ScheduleConfig,
    init_model,
)
from d3po.finetune import (
    FinetuneConfig,
    LabeledPair,
    advance_reference,
    finetune_epoch,
    generate_pair,
    step_loss,
)
from d3po.loop import (
    eval_mean_score,
    gradient_fidelity_report,
    implied_reward_eval,
    mean_policy_divergence,
    oracle_finetune_run,
    reward_weighted_run,
)
from d3po.mdp import trajectory_to_segment
from d3po.nd import AdamState, Tape
from d3po.preference import PrefStore
from d3po.seeds import derive_seed
from d3po.service import LabelSession
from d3po.theory import (
    preference_noise_bound,
    verify_noisy_labels,
    verify_optimal_policy,
)

N_SEEDS = 3
OBJECTIVES = ("compressibility", "incompressibility", "shape_fidelity")


def accept_cfg(objective: str) -> RunConfig:
    return apply_overrides(
        RunConfig(),
        [f"experiment.objective={objective}", "experiment.eval_samples=256"],
    )


def params_bytes(params) -> bytes:
    return container_bytes({}, [(n, t.data) for n, t in params.items()])


# --------------------------------------------------------------------------
# cached experiment builders


def _run_finetune(objective: str, seed: int, pretrained):
    cfg = accept_cfg(objective)
    result = oracle_finetune_run(pretrained, cfg, seed_offset=seed)
    master = derive_seed(cfg.experiment.master_seed, "ft-run", seed)
    baseline = eval_mean_score(
        pretrained, cfg, objective, cfg.experiment.eval_samples, master, "final-eval"
    )
    return result, baseline


def ft_key(objective: str, seed: int) -> str:
    return f"accept/ft-{objective}-s{seed}-{config_digest(accept_cfg(objective), seed)}"


def ft_metrics(objective: str, seed: int, pretrained) -> dict:
    key = ft_key(objective, seed)
    ckpt = cache_root() / f"{key}.ckpt"

    def build() -> dict:
        t0 = time.monotonic()
        result, baseline = _run_finetune(objective, seed, pretrained)
        ckpt.parent.mkdir(parents=True, exist_ok=True)
        save_params(ckpt, result.params, {"kind": "acceptance-finetune"})
        return {
            "objective": objective,
            "seed": seed,
            "baseline": baseline,
            "final": result.final_score,
            "best": max(result.epoch_scores[1:] + [result.final_score]),
            "epoch_scores": result.epoch_scores,
            "elapsed_secs": time.monotonic() - t0,
        }

    return cached_json(key, build)


def ft_params(objective: str, seed: int, pretrained):
    ft_metrics(objective, seed, pretrained)  # ensure the bundle exists
    return cached_params(
        ft_key(objective, seed),
        lambda: _run_finetune(objective, seed, pretrained)[0].params,
    )


# --------------------------------------------------------------------------
# fast gates


def test_gradient_fidelity():
    t0 = time.monotonic()
    report = gradient_fidelity_report(tol=1e-4)
    elapsed = time.monotonic() - t0
    detail = (f"worst relative error {report.details['worst_rel_err']:.3e} "
              f"(tol 1e-4), {elapsed:.1f}s")
    ok = report.passed and elapsed < 60
    record_criterion("gradient-fidelity", ok, detail)
    assert ok, detail


def test_closed_form_policy_matches_direct_maximization():
    t0 = time.monotonic()
    report = verify_optimal_policy()
    elapsed = time.monotonic() - t0
    n_bandits = sum("TV=" in ln for ln in report.lines)
    detail = (f"{n_bandits} randomized bandits, worst TV "
              f"{report.details['worst_tv']:.3e} (tol 1e-5), {elapsed:.1f}s")
    ok = report.passed and n_bandits >= 5 and report.details["tol"] <= 1e-5 and elapsed < 60
    record_criterion("closed-form-policy", ok, detail)
    assert ok, detail


def test_noisy_label_bound_grid_and_spot_value():
    t0 = time.monotonic()
    with pytest.warns(UserWarning):  # some grid cells have a vacuous bound
        report = verify_noisy_labels()
    elapsed = time.monotonic() - t0
    cells = report.details["cells"]
    grid = {(c["sigma"], c["delta"]) for c in cells}
    want = {(s, d) for s in (0.1, 0.3, 0.5) for d in (0.05, 0.1, 0.2)}
    spot = preference_noise_bound(0.5, 0.0, 1.0, 0.1)
    spot_ok = abs(spot - 0.5479) <= 1e-3
    ok = (report.passed and grid == want and all(c["ok"] for c in cells)
          and spot_ok and elapsed < 120)
    detail = (f"9/9 grid cells within rate<=delta, spot bound {spot:.4f} "
              f"(expect 0.5479 +- 1e-3), {elapsed:.1f}s")
    record_criterion("noisy-label-bound", ok, detail)
    assert ok, detail


def test_fresh_pair_loss_is_log_two_when_policy_equals_reference(
    pretrained_default, default_config
):
    cfg = default_config
    sched = Schedule(cfg.schedule)
    theta = pretrained_default
    ref = advance_reference(pretrained_default)
    ta, tb = generate_pair(theta, cfg.model, sched, 2, cfg.finetune.guidance_w,
                           711, 0, 0)
    seg_w, seg_l = trajectory_to_segment(ta), trajectory_to_segment(tb)
    worst = 0.0
    for k in range(sched.T):
        loss = step_loss(theta, ref, cfg.model, sched, seg_w, seg_l, k,
                         cfg.finetune.beta, cfg.finetune.guidance_w, Tape()).item()
        worst = max(worst, abs(loss - math.log(2.0)))
    ok = worst <= 1e-12
    detail = f"max |loss - log 2| over all {sched.T} steps: {worst:.2e} (tol 1e-12)"
    record_criterion("identical-policies-loss", ok, detail)
    assert ok, detail


def test_all_tie_epoch_is_a_bitwise_no_op(pretrained_default, default_config):
    cfg = default_config
    sched = Schedule(cfg.schedule)
    theta = pretrained_default.copy()
    ref = advance_reference(theta)
    pairs = []
    for i in range(3):
        ta, tb = generate_pair(theta, cfg.model, sched, i, cfg.finetune.guidance_w,
                               712, 0, i)
        pairs.append(LabeledPair(f"tie-{i}", ta, tb, "tie"))
    before = params_bytes(theta)
    stats = finetune_epoch(theta, ref, cfg.model, sched, pairs, cfg.finetune,
                           AdamState.for_params(theta))
    after = params_bytes(theta)
    ok = before == after and stats.n_ties == 3 and stats.loss_terms == 0
    detail = f"3 tie pairs: {stats.loss_terms} loss terms, parameters bitwise unchanged: {before == after}"
    record_criterion("tie-neutrality", ok, detail)
    assert ok, detail


def test_one_pair_yields_T_loss_terms_in_per_step_mode(
    pretrained_default, default_config
):
    cfg = default_config
    sched = Schedule(cfg.schedule)
    ta, tb = generate_pair(pretrained_default, cfg.model, sched, 0,
                           cfg.finetune.guidance_w, 713, 0, 0)
    pair = LabeledPair("p", ta, tb, "a")
    counts = {}
    for per_step in (True, False):
        theta = pretrained_default.copy()
        ft = FinetuneConfig(beta=cfg.finetune.beta,
                            guidance_w=cfg.finetune.guidance_w,
                            per_step=per_step, kl_probe_pairs=0)
        stats = finetune_epoch(theta, advance_reference(theta), cfg.model, sched,
                               [pair], ft, AdamState.for_params(theta))
        counts[per_step] = stats.loss_terms
    ok = counts[True] == sched.T and counts[False] == 1
    detail = (f"one labeled pair: {counts[True]} loss terms per-step "
              f"(T={sched.T}), {counts[False]} in whole-chain mode")
    record_criterion("data-utilization", ok, detail)
    assert ok, detail


def test_tape_size_is_constant_in_chain_length():
    mcfg = ModelConfig(side=6, time_dim=8, class_dim=4, hidden=(16,))
    sizes = {}
    for T in (10, 50):
        sched = Schedule(ScheduleConfig(n_steps=T))
        theta = init_model(np.random.default_rng(5), mcfg)
        ref = advance_reference(theta)
        ta, tb = generate_pair(theta, mcfg, sched, 0, 1.0, 714, 0, 0)
        tape = Tape()
        step_loss(theta, ref, mcfg, sched, trajectory_to_segment(ta),
                  trajectory_to_segment(tb), 1, 0.1, 1.0, tape)
        sizes[T] = len(tape)
    ok = sizes[10] == sizes[50]
    detail = f"retained tape nodes for one step loss: {sizes[10]} at T=10, {sizes[50]} at T=50"
    record_criterion("constant-memory", ok, detail)
    assert ok, detail


def test_round_trips(tmp_path, pretrained_default):
    # checkpoint: save -> load -> save reproduces the container byte for byte
    p1 = tmp_path / "a.ckpt"
    save_params(p1, pretrained_default, {"kind": "round-trip"})
    loaded, meta = load_params(p1)
    p2 = tmp_path / "b.ckpt"
    save_params(p2, loaded, meta)
    ckpt_ok = p1.read_bytes() == p2.read_bytes()

    # label store: replaying the persisted pairs and labels reconstructs the
    # same session state, including trajectory payloads
    cfg = RunConfig(
        model=ModelConfig(side=6, time_dim=8, class_dim=4, hidden=(16,)),
        schedule=ScheduleConfig(n_steps=4),
        pretrain=PretrainConfig(n_steps=1),
        finetune=FinetuneConfig(guidance_w=1.0, kl_probe_pairs=0),
        experiment=ExperimentConfig(master_seed=81, pairs_per_epoch=3,
                                    min_labels_per_epoch=1),
    )
    theta = init_model(np.random.default_rng(9), cfg.model)
    store = PrefStore(tmp_path / "labels")
    live = LabelSession(theta, cfg, store)
    live.enqueue_epoch_pairs()
    first = live.next_unlabeled()
    live.submit_label(first.pair_id, "a")

    r1 = LabelSession.restore(theta, cfg, PrefStore(tmp_path / "labels"))
    r2 = LabelSession.restore(theta, cfg, PrefStore(tmp_path / "labels"))
    state_ok = (
        r1.session_state() == r2.session_state()
        and list(r1.entries) == list(r2.entries)
        and all(
            np.array_equal(a.traj_a.x, b.traj_a.x)
            and np.array_equal(a.traj_b.x, b.traj_b.x)
            and a.choice == b.choice
            for a, b in zip(r1.entries.values(), r2.entries.values())
        )
        and r1.session_state()["labeled"] == 1
    )
    ok = ckpt_ok and state_ok
    detail = (f"checkpoint container byte-stable: {ckpt_ok}; "
              f"label-store replay reconstructs state: {state_ok}")
    record_criterion("round-trips", ok, detail)
    assert ok, detail


# --------------------------------------------------------------------------
# experiment-scale gates


@pytest.mark.parametrize("objective", OBJECTIVES)
def test_oracle_finetuning_improves_the_objective(objective, pretrained_default):
    runs = [ft_metrics(objective, s, pretrained_default) for s in range(N_SEEDS)]
    improvements = [r["final"] - r["baseline"] for r in runs]
    gaps = [r["best"] - r["baseline"] for r in runs]
    mean_imp = float(np.mean(improvements))
    mean_gap = float(np.mean(gaps))
    frac = mean_imp / mean_gap if mean_gap > 0 else float("nan")
    elapsed = max(r["elapsed_secs"] for r in runs)
    every_seed = all(i > 0 for i in improvements)
    ok = every_seed and mean_gap > 0 and frac >= 0.2 and elapsed < 7200
    detail = (f"256-sample mean score {runs[0]['baseline']:.2f} -> "
              f"{[round(r['final'], 2) for r in runs]} over {N_SEEDS} seeds; "
              f"improvement in every seed: {every_seed}; mean improvement "
              f"{mean_imp:.2f} = {frac:.0%} of mean best-gap {mean_gap:.2f} "
              f"(need >=20%); slowest run {elapsed:.0f}s")
    record_criterion(f"oracle-improvement[{objective}]", ok, detail)
    assert ok, detail


def _implied_metrics(seed: int, pretrained) -> dict:
    cfg = accept_cfg("compressibility")
    key = f"accept/implied-s{seed}-{config_digest(cfg, seed, 200)}"

    def build() -> dict:
        theta = ft_params("compressibility", seed, pretrained)
        ref = advance_reference(pretrained)
        master = derive_seed(cfg.experiment.master_seed, "ho-eval", seed)
        return implied_reward_eval(theta, ref, cfg, n_pairs=200, master=master)

    return cached_json(key, build)


def test_implicit_reward_ranks_held_out_samples(pretrained_default):
    # The pooled statistic mixes within-class ranking (the signal the
    # pairwise training objective actually shapes) with between-class
    # offsets of the summed log-ratio, which training never compares; a
    # seed can therefore rank well inside every class yet pool to a thin
    # margin, so per-seed values are expected to spread widely.
    rows = [_implied_metrics(s, pretrained_default) for s in range(N_SEEDS)]
    corrs = [r["spearman"] for r in rows]
    ok = all(c > 0 for c in corrs)
    detail = f"rank correlation per seed {[round(c, 3) for c in corrs]} (all must be > 0)"
    record_criterion("implicit-reward[rank-positive]", ok, detail)
    assert ok, detail


def test_implicit_reward_rank_correlation_mean(pretrained_default):
    rows = [_implied_metrics(s, pretrained_default) for s in range(N_SEEDS)]
    mean_corr = float(np.mean([r["spearman"] for r in rows]))
    ok = mean_corr >= 0.3
    detail = f"mean rank correlation over {N_SEEDS} seeds: {mean_corr:.3f} (need >= 0.3)"
    record_criterion("implicit-reward[rank-mean]", ok, detail)
    assert ok, detail


def test_implicit_reward_calibration(pretrained_default):
    # The summed log-ratio is dominated by the final denoising step, whose
    # variance sits at the configured floor, so its magnitude is ~1e8 rather
    # than O(1): a single misranked pair then costs ~1e8 nats.  Calibrated
    # pairwise likelihood would require essentially perfect ranking, which
    # the scorer does not achieve; this gate is expected to fail and is kept
    # as an honest measurement.
    rows = [_implied_metrics(s, pretrained_default) for s in range(N_SEEDS)]
    mean_nll = float(np.mean([r["bt_nll"] for r in rows]))
    ok = mean_nll < math.log(2.0)
    detail = (f"mean pairwise NLL over {N_SEEDS} seeds: {mean_nll:.3g} "
              f"(need < log 2 = 0.693)")
    record_criterion("implicit-reward[calibration]", ok, detail)
    assert ok, detail


BETA_GRID = (0.05, 0.1, 0.5)


def _beta_kl(beta: float, seed: int, pretrained) -> float:
    # Canonical training budget (same epochs/pairs as the improvement runs);
    # the reference stays fixed so end-of-run divergence is measured against
    # the same anchor at every beta.
    cfg = apply_overrides(
        RunConfig(),
        [
            "experiment.objective=compressibility",
            "experiment.fixed_reference=true",
            "experiment.eval_samples=64",
            f"finetune.beta={beta}",
        ],
    )
    key = f"accept/beta-{beta}-s{seed}-{config_digest(cfg, seed)}"

    def build() -> dict:
        result = oracle_finetune_run(pretrained, cfg, seed_offset=seed)
        ref = advance_reference(pretrained)
        kl = mean_policy_divergence(
            result.params, ref, cfg, 8,
            derive_seed(cfg.experiment.master_seed, "kl-eval", seed),
        )
        return {"mean_kl": kl, "final": result.final_score}

    return cached_json(key, build)["mean_kl"]


def test_divergence_shrinks_as_beta_grows(pretrained_default):
    # Honest measurement.  At this scale end-of-run divergence is not
    # monotone across the 2x step from beta=0.05 to beta=0.1: the
    # per-update gradient scale grows with beta, while the opposing force
    # (loss saturation freezing updates once a pair is won) arrives at
    # margins ~ 1/beta, and the divergence metric is dominated by the
    # variance-floored final step where gradient clipping erases most of
    # beta's scale separation.  The 5x step to beta=0.5 orders correctly
    # in every seed; the first link inverts, so this gate is expected to
    # fail and is kept as an honest measurement.
    means = {
        beta: float(np.mean([_beta_kl(beta, s, pretrained_default) for s in range(N_SEEDS)]))
        for beta in BETA_GRID
    }
    ordered = [means[b] for b in BETA_GRID]
    ok = all(a >= b for a, b in zip(ordered, ordered[1:]))
    detail = ("seed-averaged divergence from the reference: "
              + ", ".join(f"beta={b}: {means[b]:.3e}" for b in BETA_GRID)
              + " (must be non-increasing)")
    record_criterion("beta-sensitivity", ok, detail)
    assert ok, detail


def _rw_metrics(seed: int, pretrained) -> dict:
    cfg = accept_cfg("compressibility")
    key = f"accept/rw-s{seed}-{config_digest(cfg, seed)}"

    def build() -> dict:
        t0 = time.monotonic()
        result = reward_weighted_run(pretrained, cfg, seed_offset=seed)
        master = derive_seed(cfg.experiment.master_seed, "rw-run", seed)
        baseline = eval_mean_score(
            pretrained, cfg, "compressibility", cfg.experiment.eval_samples,
            master, "final-eval",
        )
        return {
            "baseline": baseline,
            "final": result.final_score,
            "elapsed_secs": time.monotonic() - t0,
        }

    return cached_json(key, build)


def test_preference_training_matches_reward_weighted_baseline(pretrained_default):
    d3 = [ft_metrics("compressibility", s, pretrained_default) for s in range(N_SEEDS)]
    rw = [_rw_metrics(s, pretrained_default) for s in range(N_SEEDS)]
    imp_d3 = float(np.mean([r["final"] - r["baseline"] for r in d3]))
    imp_rw = float(np.mean([r["final"] - r["baseline"] for r in rw]))
    rw_improves = imp_rw > 0
    ok = rw_improves and imp_d3 >= 0.9 * imp_rw
    detail = (f"mean improvement over {N_SEEDS} seeds: preference training "
              f"+{imp_d3:.2f} vs reward-weighted +{imp_rw:.2f} "
              f"(need >= 90% of baseline)")
    record_criterion("baseline-parity", ok, detail)
    assert ok, detail
