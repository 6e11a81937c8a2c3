# -*- coding: utf-8 -*-
"""GRPO / 玩具训练配置"""

from __future__ import annotations

import math
from dataclasses import dataclass

from libs.grpo.errors import InvalidGrpoConfig


def _positive_int(name: str, v: int, minimum: int = 1) -> None:
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise InvalidGrpoConfig(f"{name} must be an integer >= {minimum}, got {v!r}")


def _finite(name: str, v: float, *, positive: bool = False) -> None:
    if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0 or (positive and v == 0):
        op = "> 0" if positive else ">= 0"
        raise InvalidGrpoConfig(f"{name} must be finite and {op}, got {v!r}")


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 8
    num_steps: int = 4
    clip_epsilon: float = 0.2
    kl_beta: float = 0.01
    std_floor: float = 1e-8

    def __post_init__(self) -> None:
        _positive_int("group_size", self.group_size, 2)
        _positive_int("num_steps", self.num_steps)
        _finite("clip_epsilon", self.clip_epsilon, positive=True)
        _finite("kl_beta", self.kl_beta)
        _finite("std_floor", self.std_floor, positive=True)


@dataclass(frozen=True)
class TrainSettings:
    """玩具 GRPO 训练循环参数

    每轮：conditions_per_iteration 个条件 × group_size 条轨迹，按组切成 minibatches 份，
    单 epoch 内依次更新（θ_old 每轮快照一次）。
    """
    iterations: int = 200
    conditions_per_iteration: int = 8
    minibatches: int = 2
    learning_rate: float = 0.05
    step_sigma: float = 0.2
    eval_conditions: int = 32
    workers: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        _positive_int("iterations", self.iterations, 0)
        _positive_int("conditions_per_iteration", self.conditions_per_iteration)
        _positive_int("minibatches", self.minibatches)
        _finite("learning_rate", self.learning_rate)
        _finite("step_sigma", self.step_sigma, positive=True)
        _positive_int("eval_conditions", self.eval_conditions)
        _positive_int("workers", self.workers)
        if self.minibatches > self.conditions_per_iteration:
            raise InvalidGrpoConfig("minibatches cannot exceed conditions_per_iteration")


@dataclass(frozen=True)
class FlowTrainSettings:
    steps: int = 3000
    batch_size: int = 256
    learning_rate: float = 0.05
    eval_batch_size: int = 2048
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        _positive_int("steps", self.steps, 0)
        _positive_int("batch_size", self.batch_size)
        _finite("learning_rate", self.learning_rate)
        _positive_int("eval_batch_size", self.eval_batch_size)
        _finite("noise_scale", self.noise_scale)
