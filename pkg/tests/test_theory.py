"""Verification machinery: both claims, the implied values, and rank stats."""

import numpy as np
import pytest
from scipy import stats as sps

from d3po.diffusion import ModelConfig, Schedule, ScheduleConfig, init_model
from d3po.finetune import generate_pair
from d3po.mdp import trajectory_to_segment
from d3po.preference import bt_probability
from d3po.theory import (
    LOG_2,
    Prop1Config,
    Prop2Config,
    bt_nll,
    brute_force_policy,
    closed_form_policy,
    implied_chain_reward,
    implied_step_value,
    kl_objective,
    preference_noise_bound,
    rankdata_avg,
    spearman,
    total_variation,
    verify_noisy_labels,
    verify_optimal_policy,
)

TINY = ModelConfig(side=4, time_dim=8, class_dim=4, hidden=(16,))
EXAMPLE_BOUND = 0.54784265035773  # (e^2+1)(e^0.25 - 1)/(16 e 0.1)


class TestClosedForm:
    def test_normalized_and_positive(self):
        rng = np.random.default_rng(0)
        q, ref = rng.uniform(0, 1, 8), rng.dirichlet(np.ones(8))
        pi = closed_form_policy(q, ref, 0.1)
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(pi > 0)

    def test_limits(self):
        q = np.array([0.9, 0.1, 0.5])
        ref = np.array([0.2, 0.5, 0.3])
        hot = closed_form_policy(q, ref, 1e-4)
        assert hot[0] == pytest.approx(1.0, abs=1e-8)  # small beta -> argmax
        cold = closed_form_policy(q, ref, 1e4)
        np.testing.assert_allclose(cold, ref, atol=1e-4)  # large beta -> reference

    def test_closed_form_maximizes_objective(self):
        rng = np.random.default_rng(1)
        q, ref = rng.uniform(0, 1, 6), rng.dirichlet(np.ones(6))
        beta = 0.2
        pi = closed_form_policy(q, ref, beta)
        best = kl_objective(pi, q, ref, beta)
        for _ in range(50):
            other = rng.dirichlet(np.ones(6))
            assert kl_objective(other, q, ref, beta) <= best + 1e-12

    def test_constant_shift_leaves_policy_unchanged(self):
        rng = np.random.default_rng(4)
        q, ref = rng.uniform(0, 1, 8), rng.dirichlet(np.ones(8))
        for beta in (0.1, 1.0):
            base = closed_form_policy(q, ref, beta)
            for c in (-5.0, 0.37, 25.0):
                shifted = closed_form_policy(q + c, ref, beta)
                assert total_variation(shifted, base) <= 1e-12


class TestBruteForce:
    def test_matches_closed_form(self):
        rng = np.random.default_rng(3)
        for beta in (0.1, 0.5):
            q, ref = rng.uniform(0, 1, 6), rng.dirichlet(np.ones(6))
            tv = total_variation(
                brute_force_policy(q, ref, beta), closed_form_policy(q, ref, beta)
            )
            assert tv <= 1e-5

    def test_report_passes(self):
        rep = verify_optimal_policy(Prop1Config(n_cases=2, betas=(0.1, 0.5), seed=5))
        assert rep.passed
        assert rep.details["worst_tv"] <= 1e-5
        assert "PASS" in rep.summary()


class TestNoisyLabels:
    def test_example_bound_frozen(self):
        got = preference_noise_bound(0.5, 0.0, 1.0, 0.1)
        assert got == pytest.approx(0.5479, abs=1e-3)
        assert got == pytest.approx(EXAMPLE_BOUND, rel=1e-12)

    def test_grid_passes_with_vacuous_warnings(self):
        with pytest.warns(UserWarning, match="vacuously"):
            rep = verify_noisy_labels(Prop2Config())
        assert rep.passed
        cells = rep.details["cells"]
        assert len(cells) == 9
        for c in cells:
            assert c["rate"] <= c["delta"]
        assert any(c["vacuous"] for c in cells)
        assert not all(c["vacuous"] for c in cells)  # the grid is not a no-op

    def test_tight_cells_nonvacuous(self):
        cells = verify_noisy_labels(Prop2Config(sigmas=(0.1,), deltas=(0.2,))).details["cells"]
        assert cells[0]["bound"] < 1.0
        assert cells[0]["rate"] > 0.0  # bound actually bites at this setting

    def test_config_validation(self):
        with pytest.raises(ValueError):
            Prop2Config(q_pair=(2.0, 0.0), q_min=-1.5, q_max=1.5)

    def test_zero_noise_collapses_to_the_exact_probability(self):
        # With no labeler noise the perturbed returns are bitwise the true
        # returns, so every simulated label probability equals the exact
        # logistic preference probability -- no tolerance involved.
        rng = np.random.default_rng(2)
        q0, q1 = 1.0, 0.0  # the checker's default return pair, same order
        ideal = bt_probability(q1, q0)
        rep = verify_noisy_labels(Prop2Config(sigmas=(0.1,), deltas=(0.2,)))
        assert rep.details["ideal_p"] == ideal  # checker and labeler agree
        x0 = q0 + 0.0 * rng.standard_normal(512)
        x1 = q1 + 0.0 * rng.standard_normal(512)
        assert all(bt_probability(b, a) == ideal for a, b in zip(x0, x1))


class TestImpliedValues:
    def _setup(self):
        rng = np.random.default_rng(7)
        theta = init_model(rng, TINY)
        sched = Schedule(ScheduleConfig(n_steps=4))
        traj, _ = generate_pair(theta, TINY, sched, 1, 1.0, 3, 0, 0)
        return theta, sched, trajectory_to_segment(traj)

    def test_zero_when_theta_equals_ref(self):
        theta, sched, seg = self._setup()
        ref = theta.freeze()
        v = implied_step_value(theta, ref, TINY, sched, seg.state(0), seg.action(0), 0.1, 1.0)
        assert v == 0.0
        assert implied_chain_reward(theta, ref, TINY, sched, seg, 0.1, 1.0) == 0.0

    def test_telescoping_through_intermediate_policy(self):
        theta, sched, seg = self._setup()
        mid = init_model(np.random.default_rng(8), TINY)
        ref = init_model(np.random.default_rng(9), TINY)
        s, a = seg.state(1), seg.action(1)
        full = implied_step_value(theta, ref, TINY, sched, s, a, 0.1, 1.0)
        part1 = implied_step_value(theta, mid, TINY, sched, s, a, 0.1, 1.0)
        part2 = implied_step_value(mid, ref, TINY, sched, s, a, 0.1, 1.0)
        assert full == pytest.approx(part1 + part2, rel=1e-9, abs=1e-12)

    def test_antisymmetric_under_policy_swap(self):
        # Swapping the two policies negates the log-ratio exactly, both per
        # step and summed along a chain (same accumulation order).
        theta, sched, seg = self._setup()
        other = init_model(np.random.default_rng(10), TINY)
        for k in range(4):
            s, a = seg.state(k), seg.action(k)
            fwd = implied_step_value(theta, other, TINY, sched, s, a, 0.1, 1.0)
            rev = implied_step_value(other, theta, TINY, sched, s, a, 0.1, 1.0)
            assert fwd != 0.0  # distinct models genuinely disagree
            assert fwd + rev == 0.0
        chain_fwd = implied_chain_reward(theta, other, TINY, sched, seg, 0.1, 1.0)
        chain_rev = implied_chain_reward(other, theta, TINY, sched, seg, 0.1, 1.0)
        assert chain_fwd + chain_rev == 0.0

    def test_bt_nll_anchors(self):
        assert bt_nll(np.zeros(5), np.zeros(5)) == LOG_2
        assert bt_nll(np.full(5, 10.0), np.zeros(5)) < 1e-4
        assert bt_nll(np.zeros(5), np.full(5, 10.0)) > LOG_2


class TestRankStats:
    def test_rankdata_matches_scipy(self):
        rng = np.random.default_rng(0)
        x = rng.integers(0, 5, size=40).astype(float)  # plenty of ties
        np.testing.assert_allclose(rankdata_avg(x), sps.rankdata(x))

    def test_spearman_matches_scipy(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.normal(size=30)
            y = 0.5 * x + rng.normal(size=30)
            want = sps.spearmanr(x, y).statistic
            assert spearman(x, y) == pytest.approx(want, abs=1e-12)

    def test_spearman_degenerate(self):
        assert spearman(np.ones(5), np.arange(5.0)) == 0.0
