# -*- coding: utf-8 -*-
"""玩具 GRPO 训练循环

每轮：
1) 快照 θ_old
2) 采样条件，每个条件 rollout 一组 G 条轨迹（可并发，各组独立随机流）
3) 打分 -> 组内优势 -> 按组切 minibatch，依次对 J 做梯度上升（Adam）
4) 在固定的评估批（条件/初始噪声/步噪声都固定）上记录平均奖励
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from libs.common.logging import setup_logging
from libs.grpo.config import GrpoConfig, TrainSettings
from libs.grpo.env import RewardFn, ToyFlowEnv
from libs.grpo.errors import DivergenceDetected
from libs.grpo.objective import grpo_objective_and_grad
from libs.grpo.optim import Adam
from libs.grpo.policy import GaussianStepPolicy, LinearVelocityField, TrajectoryGroup

logger = setup_logging("grpo-trainer")

REPORT_COLUMNS = ["iter", "mean_reward", "eval_reward", "kl", "clip_fraction", "objective"]


@dataclass(frozen=True)
class IterationRow:
    iter: int
    mean_reward: float
    eval_reward: float
    kl: float
    clip_fraction: float
    objective: float


@dataclass
class TrainingReport:
    initial_params: np.ndarray
    final_params: np.ndarray
    initial_eval_reward: float
    rows: List[IterationRow] = field(default_factory=list)

    @property
    def drift(self) -> float:
        return float(np.linalg.norm(self.final_params - self.initial_params))

    @property
    def final_eval_reward(self) -> float:
        return self.rows[-1].eval_reward if self.rows else self.initial_eval_reward


def write_report_csv(report: TrainingReport, path: str | Path) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        for row in report.rows:
            w.writerow(asdict(row))


def read_report_csv(path: str | Path) -> List[IterationRow]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        return [
            IterationRow(
                iter=int(r["iter"]),
                mean_reward=float(r["mean_reward"]),
                eval_reward=float(r["eval_reward"]),
                kl=float(r["kl"]),
                clip_fraction=float(r["clip_fraction"]),
                objective=float(r["objective"]),
            )
            for r in csv.DictReader(f)
        ]


class _EvalBatch:
    def __init__(self, env: ToyFlowEnv, num_steps: int, n: int, seed: int):
        rng = np.random.default_rng([seed, 7])
        self.env = env
        self.conditions = env.sample_conditions(rng, n)
        self.x_init = rng.standard_normal((n, env.dim))
        self.noise = rng.standard_normal((n, num_steps, env.dim))

    def mean_reward(self, policy: GaussianStepPolicy) -> float:
        states = policy.rollout(self.x_init, self.conditions, self.noise)
        return float(self.env.reward(states[:, -1], self.conditions).mean())


def make_policy(env: ToyFlowEnv, config: GrpoConfig, settings: TrainSettings, degree: int = 3) -> GaussianStepPolicy:
    velocity_field = LinearVelocityField(env.dim, env.dim, degree)
    return GaussianStepPolicy.constant(velocity_field, velocity_field.init_params(), config.num_steps, settings.step_sigma)


def train_toy(
    env: ToyFlowEnv,
    config: GrpoConfig,
    settings: TrainSettings,
    reward_fn: Optional[RewardFn] = None,
    *,
    policy: Optional[GaussianStepPolicy] = None,
    policy_ref: Optional[GaussianStepPolicy] = None,
) -> TrainingReport:
    if reward_fn is not None:
        env = ToyFlowEnv(dim=env.dim, radius=env.radius, reward_fn=reward_fn)
    policy = policy or make_policy(env, config, settings)
    policy_ref = policy_ref or policy.copy()
    initial_params = policy.params.copy()
    opt = Adam(settings.learning_rate)
    evaluator = _EvalBatch(env, policy.num_steps, settings.eval_conditions, settings.seed)
    report = TrainingReport(initial_params, initial_params.copy(), evaluator.mean_reward(policy))

    for it in range(1, settings.iterations + 1):
        policy_old = policy.copy()
        cond_rng = np.random.default_rng([settings.seed, it, 0])
        conditions = env.sample_conditions(cond_rng, settings.conditions_per_iteration)

        def _rollout(k: int) -> TrajectoryGroup:
            rng = np.random.default_rng([settings.seed, it, k + 1])
            return env.rollout_group(policy_old, conditions[k], config.group_size, rng)

        if settings.workers > 1:
            with ThreadPoolExecutor(max_workers=settings.workers) as pool:
                groups = list(pool.map(_rollout, range(len(conditions))))
        else:
            groups = [_rollout(k) for k in range(len(conditions))]

        kls, clips, objs = [], [], []
        for chunk in np.array_split(np.arange(len(groups)), settings.minibatches):
            res = grpo_objective_and_grad([groups[i] for i in chunk], policy, policy_old, policy_ref, config)
            policy = policy.with_params(opt.step(policy.params, -res.grad))
            kls.append(res.kl)
            clips.append(res.clip_fraction)
            objs.append(res.value)

        if not np.all(np.isfinite(policy.params)):
            raise DivergenceDetected(it)

        row = IterationRow(
            iter=it,
            mean_reward=float(np.mean([g.rewards.mean() for g in groups])),
            eval_reward=evaluator.mean_reward(policy),
            kl=float(np.mean(kls)),
            clip_fraction=float(np.mean(clips)),
            objective=float(np.mean(objs)),
        )
        report.rows.append(row)
        logger.debug("grpo iteration", extra={"extra_fields": {"event": "GRPO_ITERATION", **asdict(row)}})

    report.final_params = policy.params.copy()
    logger.info(
        "grpo toy training done",
        extra={"extra_fields": {"event": "GRPO_TRAIN_DONE", "iterations": settings.iterations,
                                "initial_eval_reward": report.initial_eval_reward,
                                "final_eval_reward": report.final_eval_reward, "drift": report.drift}},
    )
    return report
