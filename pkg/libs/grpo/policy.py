# -*- coding: utf-8 -*-
"""玩具速度场与高斯逐步策略

速度场 v(x, t, c) = Σ_k t^k (A_k x + B_k c + b_k)，k = 0..degree。
对参数是线性的：v = W·φ(x, t, c)，φ = kron(e(t), [x, c, 1])，e(t) = [1, t, ..., t^degree]。

逆向过程共 𝒯 步，转移下标 j = 0..𝒯-1 对应流时间 t_j = j/𝒯（j=0 为纯噪声端）：
    x_next = x + Δ·v(x, t_j, c) + σ_j·ε，Δ = 1/𝒯
每步转移是各向同性高斯，log π 与其对 W 的梯度都有闭式。
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from libs.grpo.errors import EmptyBatch, GrpoError, ScheduleMismatch


class LinearVelocityField:
    def __init__(self, dim: int, cond_dim: int, degree: int = 3):
        if dim < 1 or cond_dim < 0 or degree < 0:
            raise GrpoError(f"invalid velocity field shape dim={dim} cond_dim={cond_dim} degree={degree}")
        self.dim = dim
        self.cond_dim = cond_dim
        self.degree = degree

    @property
    def num_features(self) -> int:
        return (self.degree + 1) * (self.dim + self.cond_dim + 1)

    @property
    def param_shape(self) -> tuple[int, int]:
        return (self.dim, self.num_features)

    def init_params(self, rng: Optional[np.random.Generator] = None, scale: float = 0.0) -> np.ndarray:
        if rng is None or scale == 0.0:
            return np.zeros(self.param_shape)
        return scale * rng.standard_normal(self.param_shape)

    def features(self, x: np.ndarray, t: np.ndarray | float, c: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        c = np.atleast_2d(np.asarray(c, dtype=np.float64))
        n = x.shape[0]
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
        base = np.concatenate([x, c, np.ones((n, 1))], axis=1)          # (n, dim+cond+1)
        powers = t[:, None] ** np.arange(self.degree + 1)[None, :]      # (n, degree+1)
        return (powers[:, :, None] * base[:, None, :]).reshape(n, -1)

    def velocity(self, params: np.ndarray, x: np.ndarray, t: np.ndarray | float, c: np.ndarray) -> np.ndarray:
        return self.features(x, t, c) @ params.T


@dataclass(frozen=True)
class StepBatch:
    """展平后的转移集合：第 n 条记录 x[n] --(下标 j[n])--> x_next[n]，条件 c[n]"""
    x: np.ndarray
    x_next: np.ndarray
    j: np.ndarray
    c: np.ndarray

    def __len__(self) -> int:
        return int(self.x.shape[0])


@dataclass(frozen=True)
class Trajectory:
    """states[0] = x_𝒯（初始噪声），states[-1] = x_0（生成结果），共 𝒯 次转移"""
    states: np.ndarray
    condition: np.ndarray

    @property
    def num_transitions(self) -> int:
        return int(self.states.shape[0]) - 1

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def transitions(self) -> StepBatch:
        n = self.num_transitions
        return StepBatch(
            x=self.states[:-1],
            x_next=self.states[1:],
            j=np.arange(n),
            c=np.repeat(self.condition[None, :], n, axis=0),
        )


@dataclass(frozen=True)
class TrajectoryGroup:
    trajectories: tuple[Trajectory, ...]
    rewards: np.ndarray
    condition: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        object.__setattr__(self, "rewards", np.asarray(self.rewards, dtype=np.float64))
        if len(self.trajectories) != self.rewards.shape[0]:
            raise GrpoError(f"group has {len(self.trajectories)} trajectories but {self.rewards.shape[0]} rewards")
        steps = {t.num_transitions for t in self.trajectories}
        if len(steps) > 1:
            raise GrpoError(f"trajectories in a group must share the step count, got {sorted(steps)}")

    @property
    def size(self) -> int:
        return len(self.trajectories)

    @property
    def num_steps(self) -> int:
        return self.trajectories[0].num_transitions if self.trajectories else 0

    def step_batch(self) -> StepBatch:
        """按 (轨迹, 步) 行优先展平"""
        parts = [t.transitions() for t in self.trajectories]
        return StepBatch(
            x=np.concatenate([p.x for p in parts]),
            x_next=np.concatenate([p.x_next for p in parts]),
            j=np.concatenate([p.j for p in parts]),
            c=np.concatenate([p.c for p in parts]),
        )


class GaussianStepPolicy:
    def __init__(self, field: LinearVelocityField, params: np.ndarray, sigmas: Sequence[float]):
        params = np.asarray(params, dtype=np.float64)
        if params.shape != field.param_shape:
            raise GrpoError(f"params shape {params.shape} does not match field {field.param_shape}")
        sig = np.asarray(sigmas, dtype=np.float64)
        if sig.ndim != 1 or sig.size < 1 or not np.all(np.isfinite(sig)) or np.any(sig <= 0):
            raise GrpoError("per-step sigmas must be a non-empty vector of positive reals")
        self.field = field
        self.params = params
        self.sigmas = sig

    @staticmethod
    def constant(field: LinearVelocityField, params: np.ndarray, num_steps: int, sigma: float) -> "GaussianStepPolicy":
        return GaussianStepPolicy(field, params, np.full(num_steps, float(sigma)))

    @property
    def num_steps(self) -> int:
        return int(self.sigmas.shape[0])

    @property
    def dt(self) -> float:
        return 1.0 / self.num_steps

    def flow_time(self, j: np.ndarray | int) -> np.ndarray:
        return np.asarray(j, dtype=np.float64) / self.num_steps

    def with_params(self, params: np.ndarray) -> "GaussianStepPolicy":
        return GaussianStepPolicy(self.field, params, self.sigmas)

    def copy(self) -> "GaussianStepPolicy":
        return GaussianStepPolicy(self.field, self.params.copy(), self.sigmas.copy())

    def mean(self, batch: StepBatch) -> tuple[np.ndarray, np.ndarray]:
        """返回 (μ, φ)"""
        phi = self.field.features(batch.x, self.flow_time(batch.j), batch.c)
        return batch.x + self.dt * (phi @ self.params.T), phi

    def log_prob(self, batch: StepBatch) -> np.ndarray:
        mu, _ = self.mean(batch)
        sig = self.sigmas[batch.j]
        d = batch.x.shape[1]
        sq = np.sum((batch.x_next - mu) ** 2, axis=1)
        return -sq / (2.0 * sig**2) - d * np.log(sig * math.sqrt(2.0 * math.pi))

    def log_prob_grad(self, batch: StepBatch) -> tuple[np.ndarray, np.ndarray]:
        """返回 (log π, ∂log π/∂W)，梯度形状 (n, dim, F)：Δ·outer((x'-μ)/σ², φ)"""
        mu, phi = self.mean(batch)
        sig = self.sigmas[batch.j]
        d = batch.x.shape[1]
        diff = batch.x_next - mu
        logp = -np.sum(diff**2, axis=1) / (2.0 * sig**2) - d * np.log(sig * math.sqrt(2.0 * math.pi))
        scaled = diff / (sig**2)[:, None]
        grad = self.dt * scaled[:, :, None] * phi[:, None, :]
        return logp, grad

    def rollout(self, x_init: np.ndarray, condition: np.ndarray, noise: np.ndarray) -> np.ndarray:
        """批量 rollout：x_init (B,d)，condition (B,dc)，noise (B,𝒯,d) -> states (B,𝒯+1,d)"""
        x = np.atleast_2d(np.asarray(x_init, dtype=np.float64))
        c = np.atleast_2d(np.asarray(condition, dtype=np.float64))
        b, d = x.shape
        if noise.shape != (b, self.num_steps, d):
            raise GrpoError(f"noise shape {noise.shape} does not match (batch={b}, steps={self.num_steps}, dim={d})")
        states = np.empty((b, self.num_steps + 1, d))
        states[:, 0] = x
        for j in range(self.num_steps):
            v = self.field.velocity(self.params, x, j / self.num_steps, c)
            x = x + self.dt * v + self.sigmas[j] * noise[:, j]
            states[:, j + 1] = x
        return states


def _check_compatible(a: GaussianStepPolicy, b: GaussianStepPolicy) -> None:
    if a.sigmas.shape != b.sigmas.shape or not np.array_equal(a.sigmas, b.sigmas):
        raise ScheduleMismatch("policies must share the per-step sigma schedule")
    if a.field.param_shape != b.field.param_shape or a.field.degree != b.field.degree:
        raise ScheduleMismatch("policies must share the velocity field shape")


def gaussian_kl_terms(policy_a: GaussianStepPolicy, policy_b: GaussianStepPolicy, batch: StepBatch) -> tuple[np.ndarray, np.ndarray]:
    """逐样本 KL(π_a || π_b) = |μ_a - μ_b|² / (2σ²) 及其对 W_a 的梯度 (n, dim, F)"""
    _check_compatible(policy_a, policy_b)
    mu_a, phi = policy_a.mean(batch)
    mu_b, _ = policy_b.mean(batch)
    sig2 = policy_a.sigmas[batch.j] ** 2
    delta = mu_a - mu_b
    kl = np.sum(delta**2, axis=1) / (2.0 * sig2)
    grad = policy_a.dt * (delta / sig2[:, None])[:, :, None] * phi[:, None, :]
    return kl, grad


def gaussian_kl(policy_a: GaussianStepPolicy, policy_b: GaussianStepPolicy, batch: StepBatch) -> float:
    if len(batch) == 0:
        raise EmptyBatch("KL needs at least one state")
    kl, _ = gaussian_kl_terms(policy_a, policy_b, batch)
    return float(kl.mean())
