# -*- coding: utf-8 -*-
"""玩具流环境：2 维向量上的 𝒯 步高斯逆过程

- 条件 = 半径 radius 圆周上的随机目标点
- 初始状态 x_𝒯 ~ N(0, I)，同组 G 条轨迹共享初始噪声，各步噪声独立
- 终端奖励默认 exp(-|x_0 - target|²) ∈ (0, 1]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from libs.grpo.policy import GaussianStepPolicy, Trajectory, TrajectoryGroup

RewardFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def distance_reward(x0: np.ndarray, condition: np.ndarray) -> np.ndarray:
    x0 = np.atleast_2d(x0)
    condition = np.atleast_2d(condition)
    return np.exp(-np.sum((x0 - condition) ** 2, axis=1))


@dataclass(frozen=True)
class ToyFlowEnv:
    dim: int = 2
    radius: float = 2.0
    reward_fn: Optional[RewardFn] = None

    def sample_conditions(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.dim == 2:
            ang = rng.uniform(0.0, 2.0 * np.pi, size=n)
            return self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        v = rng.standard_normal((n, self.dim))
        return self.radius * v / np.linalg.norm(v, axis=1, keepdims=True)

    def reward(self, x0: np.ndarray, condition: np.ndarray) -> np.ndarray:
        fn = self.reward_fn or distance_reward
        return np.asarray(fn(x0, condition), dtype=np.float64)

    def rollout_group(
        self, policy: GaussianStepPolicy, condition: np.ndarray, group_size: int, rng: np.random.Generator
    ) -> TrajectoryGroup:
        x_init = np.repeat(rng.standard_normal((1, self.dim)), group_size, axis=0)
        cond = np.repeat(np.asarray(condition, dtype=np.float64)[None, :], group_size, axis=0)
        noise = rng.standard_normal((group_size, policy.num_steps, self.dim))
        states = policy.rollout(x_init, cond, noise)
        rewards = self.reward(states[:, -1], cond)
        return TrajectoryGroup(
            trajectories=tuple(Trajectory(states=states[i], condition=cond[i]) for i in range(group_size)),
            rewards=rewards,
            condition=np.asarray(condition, dtype=np.float64),
        )
