# -*- coding: utf-8 -*-
"""流匹配（直线插值路径）速度回归

x_t = (1-t)·x_noise + t·x_1，目标速度 u = x_1 - x_noise，
loss = mean_b |v(x_t, t, c) - u|²
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from libs.common.logging import setup_logging
from libs.grpo.config import FlowTrainSettings
from libs.grpo.errors import EmptyBatch, GrpoError
from libs.grpo.optim import Adam
from libs.grpo.policy import LinearVelocityField

logger = setup_logging("flow-matching")

VelocityFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

T_SCHEDULES = ("uniform", "logit_normal")


def sample_times(rng: np.random.Generator, n: int, schedule: str = "uniform") -> np.ndarray:
    if schedule == "uniform":
        return rng.uniform(0.0, 1.0, size=n)
    if schedule == "logit_normal":
        return 1.0 / (1.0 + np.exp(-rng.standard_normal(n)))
    raise GrpoError(f"unknown time schedule {schedule!r}; known: {T_SCHEDULES}")


def _prepare(x1, condition, t, x_noise, rng, noise_scale, schedule):
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    n = x1.shape[0] if np.asarray(x1).size else 0
    if n == 0:
        raise EmptyBatch("flow matching loss needs a non-empty batch")
    c = np.atleast_2d(np.asarray(condition, dtype=np.float64))
    if t is None or x_noise is None:
        rng = rng if rng is not None else np.random.default_rng(0)
    if t is None:
        t = sample_times(rng, n, schedule)
    if x_noise is None:
        x_noise = noise_scale * rng.standard_normal(x1.shape)
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (n,))
    x_noise = np.asarray(x_noise, dtype=np.float64)
    x_t = (1.0 - t)[:, None] * x_noise + t[:, None] * x1
    return x_t, t, c, x1 - x_noise


def flow_matching_loss(
    velocity_fn: VelocityFn,
    x1: np.ndarray,
    condition: np.ndarray,
    *,
    t: Optional[np.ndarray] = None,
    x_noise: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    noise_scale: float = 1.0,
    schedule: str = "uniform",
) -> float:
    x_t, t, c, target = _prepare(x1, condition, t, x_noise, rng, noise_scale, schedule)
    pred = np.asarray(velocity_fn(x_t, t, c), dtype=np.float64)
    return float(np.mean(np.sum((pred - target) ** 2, axis=1)))


def flow_matching_loss_and_grad(
    velocity_field: LinearVelocityField,
    params: np.ndarray,
    x1: np.ndarray,
    condition: np.ndarray,
    *,
    t: Optional[np.ndarray] = None,
    x_noise: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    noise_scale: float = 1.0,
    schedule: str = "uniform",
) -> tuple[float, np.ndarray]:
    x_t, t, c, target = _prepare(x1, condition, t, x_noise, rng, noise_scale, schedule)
    phi = velocity_field.features(x_t, t, c)
    resid = phi @ params.T - target
    n = resid.shape[0]
    return float(np.mean(np.sum(resid**2, axis=1))), (2.0 / n) * resid.T @ phi


@dataclass(frozen=True)
class FlowToyData:
    """圆周上的若干簇中心；样本 = 中心 + spread·噪声，条件 = 中心"""
    centers: np.ndarray
    spread: float = 0.02

    @staticmethod
    def circle(num_centers: int = 8, radius: float = 2.0, spread: float = 0.02) -> "FlowToyData":
        ang = 2.0 * np.pi * np.arange(num_centers) / num_centers
        return FlowToyData(np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1), spread)

    @property
    def dim(self) -> int:
        return int(self.centers.shape[1])

    def sample(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        idx = rng.integers(0, self.centers.shape[0], size=n)
        c = self.centers[idx]
        return c + self.spread * rng.standard_normal(c.shape), c


@dataclass
class FlowReport:
    params: np.ndarray
    initial_loss: float
    final_loss: float
    eval_curve: List[tuple[int, float]] = field(default_factory=list)

    @property
    def reduction(self) -> float:
        return self.initial_loss / self.final_loss if self.final_loss > 0 else float("inf")


def train_flow_toy(
    velocity_field: LinearVelocityField,
    data: FlowToyData,
    settings: FlowTrainSettings,
    *,
    eval_every: int = 100,
) -> FlowReport:
    """Adam + 线性衰减学习率；在固定评估批上记录 loss"""
    rng = np.random.default_rng(settings.seed)
    eval_rng = np.random.default_rng([settings.seed, 1])
    ex1, ec = data.sample(eval_rng, settings.eval_batch_size)
    et = sample_times(eval_rng, settings.eval_batch_size)
    en = settings.noise_scale * eval_rng.standard_normal(ex1.shape)

    def _eval(p: np.ndarray) -> float:
        return flow_matching_loss(lambda x, t, c: velocity_field.velocity(p, x, t, c), ex1, ec, t=et, x_noise=en)

    params = velocity_field.init_params()
    opt = Adam(settings.learning_rate)
    initial = _eval(params)
    curve = [(0, initial)]
    for step in range(settings.steps):
        x1, c = data.sample(rng, settings.batch_size)
        _, grad = flow_matching_loss_and_grad(
            velocity_field, params, x1, c, rng=rng, noise_scale=settings.noise_scale
        )
        lr_t = settings.learning_rate * (1.0 - step / settings.steps)
        params = opt.step(params, grad, lr=lr_t)
        if (step + 1) % eval_every == 0 or step + 1 == settings.steps:
            curve.append((step + 1, _eval(params)))

    final = curve[-1][1]
    logger.info(
        "flow toy trained",
        extra={"extra_fields": {"event": "FLOW_TRAIN_DONE", "steps": settings.steps, "initial_loss": initial, "final_loss": final}},
    )
    return FlowReport(params=params, initial_loss=initial, final_loss=final, eval_curve=curve)
