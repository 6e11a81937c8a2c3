# -*- coding: utf-8 -*-
from __future__ import annotations

import math

import numpy as np
import pytest

from libs.grpo.advantages import clipped_term, group_advantages, step_ratio
from libs.grpo.config import FlowTrainSettings, GrpoConfig, TrainSettings
from libs.grpo.env import ToyFlowEnv
from libs.grpo.errors import GroupTooSmall, InvalidGrpoConfig, NonFiniteLogProb, ScheduleMismatch
from libs.grpo.flow_matching import FlowToyData, flow_matching_loss, train_flow_toy
from libs.grpo.objective import gradient_check, grpo_objective, group_surrogate
from libs.grpo.optim import Adam
from libs.grpo.policy import GaussianStepPolicy, LinearVelocityField, StepBatch, gaussian_kl
from libs.grpo.trainer import read_report_csv, train_toy, write_report_csv


def _policy(rng: np.random.Generator, num_steps: int = 4, sigma: float = 0.2, scale: float = 0.3) -> GaussianStepPolicy:
    field = LinearVelocityField(2, 2, 3)
    return GaussianStepPolicy.constant(field, field.init_params(rng, scale), num_steps, sigma)


def _groups(env: ToyFlowEnv, policy: GaussianStepPolicy, n: int, group_size: int, rng: np.random.Generator):
    conditions = env.sample_conditions(rng, n)
    return [env.rollout_group(policy, c, group_size, rng) for c in conditions]


def test_group_advantages_are_standardized(rng):
    for _ in range(1000):
        g = int(rng.integers(2, 17))
        rewards = rng.normal(rng.uniform(-5, 5), rng.uniform(0.01, 3.0), size=g)
        adv = group_advantages(rewards)
        assert abs(adv.mean()) < 1e-9
        assert adv.std() == pytest.approx(1.0, abs=1e-9)


def test_group_advantages_ignore_positive_affine_maps(rng):
    for _ in range(1000):
        g = int(rng.integers(2, 17))
        rewards = rng.normal(0.0, rng.uniform(0.1, 3.0), size=g)
        a, b = rng.uniform(0.1, 10.0), rng.uniform(-10.0, 10.0)
        assert np.max(np.abs(group_advantages(a * rewards + b) - group_advantages(rewards))) < 1e-9


def test_constant_group_has_zero_advantages():
    assert np.all(group_advantages([0.7] * 5) == 0.0)


def test_step_ratio_values():
    assert step_ratio(math.log(2.0), 0.0) == pytest.approx(2.0)
    assert step_ratio(-math.log(4.0), 0.0) == pytest.approx(0.25)
    assert step_ratio(1.3, 1.3) == 1.0


def test_group_of_one_is_rejected():
    with pytest.raises(GroupTooSmall):
        group_advantages([1.0])


def test_clipped_term_picks_pessimistic_branch():
    assert clipped_term(1.5, 1.0, 0.2) == pytest.approx(1.2)
    assert clipped_term(0.5, 1.0, 0.2) == pytest.approx(0.5)
    assert clipped_term(0.5, -1.0, 0.2) == pytest.approx(-0.8)
    assert clipped_term(1.5, -1.0, 0.2) == pytest.approx(-1.5)


def test_clipped_term_never_exceeds_unclipped(rng):
    for _ in range(5000):
        r = float(rng.uniform(0.0, 3.0))
        adv = float(rng.normal(0.0, 2.0))
        eps = float(rng.uniform(0.01, 0.5))
        assert clipped_term(r, adv, eps) <= r * adv + 1e-12


def test_group_surrogate_small_worked_case():
    adv = group_advantages([1.0, 0.0])
    assert list(adv) == [1.0, -1.0]
    logp_old = np.zeros((2, 1))
    logp_new = np.array([[math.log(1.5)], [math.log(0.5)]])
    assert group_surrogate(logp_new, logp_old, adv, 0.2) == pytest.approx(0.2)


def test_non_finite_log_prob_reports_position():
    new = np.zeros((2, 3))
    new[1, 2] = np.nan
    with pytest.raises(NonFiniteLogProb) as ei:
        group_surrogate(new, np.zeros((2, 3)), np.array([1.0, -1.0]), 0.2)
    assert ei.value.trajectory == 1
    assert ei.value.step == 2
    with pytest.raises(NonFiniteLogProb):
        step_ratio(float("inf"), 0.0)


def test_objective_is_zero_when_all_policies_coincide(rng):
    env = ToyFlowEnv()
    config = GrpoConfig(group_size=4, num_steps=4, kl_beta=0.5)
    for _ in range(20):
        policy = _policy(rng)
        groups = _groups(env, policy, 3, 4, rng)
        assert abs(grpo_objective(groups, policy, policy, policy, config)) < 1e-12


def test_analytic_gradient_matches_finite_differences():
    env = ToyFlowEnv()
    config = GrpoConfig(group_size=4, num_steps=4, clip_epsilon=0.2, kl_beta=0.1)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        policy = _policy(rng)
        policy_old = policy.with_params(policy.params + 1e-3 * rng.standard_normal(policy.params.shape))
        policy_ref = policy.with_params(policy.params + 0.1 * rng.standard_normal(policy.params.shape))
        groups = _groups(env, policy_old, 2, 4, rng)
        check = gradient_check(groups, policy, policy_old, policy_ref, config)
        assert check.max_relative_error < 1e-4


def test_kl_requires_matching_schedules(rng):
    a = _policy(rng, num_steps=4, sigma=0.2)
    b = _policy(rng, num_steps=4, sigma=0.3)
    batch = _groups(ToyFlowEnv(), a, 1, 2, rng)[0].step_batch()
    with pytest.raises(ScheduleMismatch):
        gaussian_kl(a, b, batch)
    assert gaussian_kl(a, a, batch) == 0.0


def test_gaussian_kl_closed_form(rng):
    field = LinearVelocityField(2, 2, 3)
    params = field.init_params(rng, 0.3)
    a = GaussianStepPolicy.constant(field, params, 4, 0.2)
    shifted = params.copy()
    shifted[:, field.dim + field.cond_dim] += np.array([0.6, 0.8])
    b = a.with_params(shifted)
    n = 50
    batch = StepBatch(rng.standard_normal((n, 2)), rng.standard_normal((n, 2)), rng.integers(0, 4, size=n), rng.standard_normal((n, 2)))
    # 均值差 = dt·δ，|δ| = 1
    assert gaussian_kl(a, b, batch) == pytest.approx((0.25**2) / (2.0 * 0.2**2))
    for _ in range(20):
        c = a.with_params(field.init_params(rng, 0.5))
        assert gaussian_kl(a, c, batch) > 0.0


def test_flow_matching_loss_examples(rng):
    x1 = rng.standard_normal((16, 2))
    cond = rng.standard_normal((16, 2))
    t = rng.uniform(0.0, 1.0, size=16)
    noise = rng.standard_normal((16, 2))
    exact = lambda x_t, tt, c: x1 - noise
    assert flow_matching_loss(exact, x1, cond, t=t, x_noise=noise) == 0.0

    unit = x1 / np.linalg.norm(x1, axis=1, keepdims=True)
    zero = lambda x_t, tt, c: np.zeros_like(x_t)
    assert flow_matching_loss(zero, unit, cond, t=t, x_noise=np.zeros_like(unit)) == pytest.approx(1.0)

    field = LinearVelocityField(2, 2, 3)
    params = field.init_params(rng, 0.5)
    linear = lambda x_t, tt, c: field.velocity(params, x_t, tt, c)
    perm = rng.permutation(16)
    assert flow_matching_loss(linear, x1, cond, t=t, x_noise=noise) == pytest.approx(
        flow_matching_loss(linear, x1[perm], cond[perm], t=t[perm], x_noise=noise[perm]), rel=1e-12
    )


def test_config_preconditions():
    with pytest.raises(InvalidGrpoConfig):
        GrpoConfig(group_size=1)
    with pytest.raises(InvalidGrpoConfig):
        GrpoConfig(clip_epsilon=0.0)
    with pytest.raises(InvalidGrpoConfig):
        GrpoConfig(kl_beta=-0.1)
    with pytest.raises(InvalidGrpoConfig):
        TrainSettings(conditions_per_iteration=2, minibatches=3)
    with pytest.raises(InvalidGrpoConfig):
        FlowTrainSettings(batch_size=0)


def test_toy_training_improves_group_and_eval_reward():
    report = train_toy(ToyFlowEnv(), GrpoConfig(), TrainSettings(iterations=200))
    assert len(report.rows) == 200
    assert report.final_eval_reward >= 1.5 * report.initial_eval_reward
    assert report.rows[-1].mean_reward >= 1.5 * report.rows[0].mean_reward
    assert all(math.isfinite(r.kl) and r.kl >= 0.0 for r in report.rows)
    assert all(0.0 <= r.clip_fraction <= 1.0 for r in report.rows)


def test_zero_learning_rate_leaves_parameters_untouched():
    report = train_toy(ToyFlowEnv(), GrpoConfig(), TrainSettings(iterations=10, learning_rate=0.0))
    assert np.array_equal(report.final_params, report.initial_params)
    assert report.drift == 0.0


def test_strong_kl_penalty_limits_drift():
    settings = TrainSettings(iterations=50)
    free = train_toy(ToyFlowEnv(), GrpoConfig(kl_beta=0.0), settings)
    anchored = train_toy(ToyFlowEnv(), GrpoConfig(kl_beta=1e3), settings)
    assert anchored.drift < 1.0
    assert anchored.drift < free.drift


def test_parallel_rollouts_match_serial():
    serial = train_toy(ToyFlowEnv(), GrpoConfig(), TrainSettings(iterations=5, workers=1))
    parallel = train_toy(ToyFlowEnv(), GrpoConfig(), TrainSettings(iterations=5, workers=4))
    assert serial.rows == parallel.rows
    assert np.array_equal(serial.final_params, parallel.final_params)


def test_report_csv_round_trip(tmp_path):
    report = train_toy(ToyFlowEnv(), GrpoConfig(), TrainSettings(iterations=3))
    path = tmp_path / "out" / "training_report.csv"
    write_report_csv(report, path)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "iter,mean_reward,eval_reward,kl,clip_fraction,objective"
    assert read_report_csv(path) == report.rows


def test_custom_reward_function_is_used():
    report = train_toy(ToyFlowEnv(), GrpoConfig(), TrainSettings(iterations=2), reward_fn=lambda x0, c: np.ones(len(x0)))
    assert all(r.mean_reward == 1.0 for r in report.rows)
    assert report.initial_eval_reward == pytest.approx(1.0)


def test_flow_matching_pretraining_reduces_loss():
    report = train_flow_toy(LinearVelocityField(2, 2, 3), FlowToyData.circle(), FlowTrainSettings())
    assert report.reduction >= 10.0
    assert report.eval_curve[0] == (0, report.initial_loss)
    assert report.eval_curve[-1][0] == 3000


def test_adam_minimizes_a_quadratic():
    opt = Adam(0.1)
    x = np.array([5.0, -4.0])
    for _ in range(1000):
        x = opt.step(x, 2.0 * (x - np.array([3.0, 1.0])))
    assert x == pytest.approx([3.0, 1.0], abs=1e-2)
