# -*- coding: utf-8 -*-
"""GRPO 目标（裁剪比率代理项 - β·KL）及解析梯度

J(θ) = mean_groups[ (1/G)Σ_i (1/𝒯)Σ_t min(r·Â_i, clip(r,1-ε,1+ε)·Â_i) - β·KL(π_θ || π_ref) ]
- r = π_θ / π_old，逐步计算，所有 𝒯 步都参与
- KL 为访问过的状态上的逐步闭式高斯 KL 的均值
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from libs.grpo.advantages import clipped_terms, group_advantages
from libs.grpo.config import GrpoConfig
from libs.grpo.errors import EmptyBatch, GrpoError, NonFiniteLogProb
from libs.grpo.policy import GaussianStepPolicy, TrajectoryGroup, gaussian_kl_terms


@dataclass(frozen=True)
class ObjectiveResult:
    value: float
    grad: np.ndarray
    surrogate: float
    kl: float
    clip_fraction: float


def _first_non_finite(values: np.ndarray) -> int | None:
    bad = np.flatnonzero(~np.isfinite(values))
    return int(bad[0]) if bad.size else None


def group_surrogate(logp_new: np.ndarray, logp_old: np.ndarray, advantages: np.ndarray, epsilon: float) -> float:
    """单组代理项：输入 (G, 𝒯) 的新旧 log 概率与 (G,) 优势"""
    new = np.asarray(logp_new, dtype=np.float64)
    old = np.asarray(logp_old, dtype=np.float64)
    for arr in (new, old):
        flat = _first_non_finite(arr.ravel())
        if flat is not None:
            i, t = divmod(flat, arr.shape[1])
            raise NonFiniteLogProb("non-finite log-probability", trajectory=i, step=t)
    ratios = np.exp(new - old)
    adv = np.asarray(advantages, dtype=np.float64)[:, None] * np.ones_like(ratios)
    terms, _ = clipped_terms(ratios, adv, epsilon)
    return float(terms.mean())


def _group_objective(
    g: int,
    group: TrajectoryGroup,
    policy: GaussianStepPolicy,
    policy_old: GaussianStepPolicy,
    policy_ref: GaussianStepPolicy,
    config: GrpoConfig,
) -> ObjectiveResult:
    if group.size != config.group_size:
        raise GrpoError(f"group {g} has {group.size} trajectories, expected {config.group_size}")
    if group.num_steps != policy.num_steps or policy.num_steps != config.num_steps:
        raise GrpoError(f"group {g} has {group.num_steps} steps; policy {policy.num_steps}; config {config.num_steps}")

    adv = group_advantages(group.rewards, config.std_floor)
    batch = group.step_batch()
    n_steps = group.num_steps

    lp_new, g_new = policy.log_prob_grad(batch)
    lp_old = policy_old.log_prob(batch)
    for arr in (lp_new, lp_old):
        flat = _first_non_finite(arr)
        if flat is not None:
            i, t = divmod(flat, n_steps)
            raise NonFiniteLogProb("non-finite log-probability", group=g, trajectory=i, step=t)

    ratios = np.exp(lp_new - lp_old)
    a = np.repeat(adv, n_steps)
    terms, take_unclipped = clipped_terms(ratios, a, config.clip_epsilon)
    n = terms.shape[0]
    surrogate = float(terms.mean())
    coef = np.where(take_unclipped, a * ratios, 0.0)
    g_surrogate = np.tensordot(coef, g_new, axes=(0, 0)) / n

    kl_terms, kl_grad = gaussian_kl_terms(policy, policy_ref, batch)
    kl = float(kl_terms.mean())
    g_kl = kl_grad.mean(axis=0)

    beta = config.kl_beta
    return ObjectiveResult(
        value=surrogate - beta * kl,
        grad=g_surrogate - beta * g_kl,
        surrogate=surrogate,
        kl=kl,
        clip_fraction=float(np.mean(np.abs(ratios - 1.0) > config.clip_epsilon)),
    )


def grpo_objective_and_grad(
    groups: Sequence[TrajectoryGroup],
    policy: GaussianStepPolicy,
    policy_old: GaussianStepPolicy,
    policy_ref: GaussianStepPolicy,
    config: GrpoConfig,
) -> ObjectiveResult:
    if not groups:
        raise EmptyBatch("objective needs at least one trajectory group")
    parts = [_group_objective(g, grp, policy, policy_old, policy_ref, config) for g, grp in enumerate(groups)]
    k = len(parts)
    return ObjectiveResult(
        value=sum(p.value for p in parts) / k,
        grad=sum(p.grad for p in parts) / k,
        surrogate=sum(p.surrogate for p in parts) / k,
        kl=sum(p.kl for p in parts) / k,
        clip_fraction=sum(p.clip_fraction for p in parts) / k,
    )


def grpo_objective(
    groups: Sequence[TrajectoryGroup],
    policy: GaussianStepPolicy,
    policy_old: GaussianStepPolicy,
    policy_ref: GaussianStepPolicy,
    config: GrpoConfig,
) -> float:
    return grpo_objective_and_grad(groups, policy, policy_old, policy_ref, config).value


@dataclass(frozen=True)
class GradientCheck:
    analytic: np.ndarray
    numeric: np.ndarray
    relative_error: np.ndarray

    @property
    def max_relative_error(self) -> float:
        return float(self.relative_error.max())


def gradient_check(
    groups: Sequence[TrajectoryGroup],
    policy: GaussianStepPolicy,
    policy_old: GaussianStepPolicy,
    policy_ref: GaussianStepPolicy,
    config: GrpoConfig,
    *,
    h: float = 1e-5,
    floor: float = 1e-6,
) -> GradientCheck:
    """中心差分逐坐标核对解析梯度；相对误差 |a-n| / max(|a|, |n|, floor)"""
    analytic = grpo_objective_and_grad(groups, policy, policy_old, policy_ref, config).grad
    numeric = np.zeros_like(analytic)
    base = policy.params
    for idx in np.ndindex(base.shape):
        plus = base.copy()
        plus[idx] += h
        minus = base.copy()
        minus[idx] -= h
        f_plus = grpo_objective(groups, policy.with_params(plus), policy_old, policy_ref, config)
        f_minus = grpo_objective(groups, policy.with_params(minus), policy_old, policy_ref, config)
        numeric[idx] = (f_plus - f_minus) / (2.0 * h)
    rel = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return GradientCheck(analytic=analytic, numeric=numeric, relative_error=rel)
