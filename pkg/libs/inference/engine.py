# -*- coding: utf-8 -*-
"""迭代推理主循环

控制流：
1) 一次 plan_and_generate -> (Z_plan, Y_0)，计划先按上下文校验，失败即 PlanInvalid
2) 最多 N 次 evaluate_and_refine(T, V, Z_plan, Y_current)，收到 satisfied 反馈后立即停止
3) final_image = 最后一次修正调用返回的图像

约束：
- 满足时后端必须原样返回当前图像，否则视为 BackendFailure
- 后端异常不在这里重试（重试属于后端适配器），统一包装为 BackendFailure(iteration)
- 奖励记录只做观测，不影响控制流
"""

from __future__ import annotations

from typing import List, Optional

from libs.common.images import ImageRef
from libs.common.logging import setup_logging
from libs.inference.errors import BackendFailure, InvalidConfig, PlanInvalid
from libs.inference.models import (
    EngineConfig,
    EpisodeStep,
    EpisodeTrace,
    GenerationBackend,
    Prompt,
    RewardEvaluator,
    TerminatedBy,
    VisualContext,
)
from libs.plan.models import Checklist, EvalFeedback
from libs.plan.validation import validate_against_context, validate_feedback

logger = setup_logging("inference-engine")


def _plan_call(backend: GenerationBackend, prompt: Prompt, context: VisualContext):
    try:
        plan, image = backend.plan_and_generate(prompt, context)
    except Exception as e:
        raise BackendFailure(0, f"plan_and_generate failed: {e}", e) from e
    if not isinstance(plan, Checklist) or not isinstance(image, ImageRef):
        raise BackendFailure(0, "plan_and_generate must return (Checklist, ImageRef)")
    return plan, image


def _refine_call(backend: GenerationBackend, k: int, prompt: Prompt, context: VisualContext, plan: Checklist, current: ImageRef):
    try:
        feedback, image = backend.evaluate_and_refine(prompt, context, plan, current)
    except Exception as e:
        raise BackendFailure(k, f"evaluate_and_refine failed: {e}", e) from e
    if not isinstance(feedback, EvalFeedback) or not isinstance(image, ImageRef):
        raise BackendFailure(k, "evaluate_and_refine must return (EvalFeedback, ImageRef)")
    bad = validate_feedback(feedback, plan)
    if bad:
        raise BackendFailure(k, "feedback does not match plan: " + ", ".join(v.describe() for v in bad))
    if feedback.satisfied and image != current:
        raise BackendFailure(k, "satisfied feedback must return the current image unchanged")
    return feedback, image


def run_episode(
    backend: GenerationBackend,
    prompt: Prompt,
    context: VisualContext,
    config: EngineConfig,
    scorer: Optional[RewardEvaluator] = None,
) -> EpisodeTrace:
    if config.record_rewards and scorer is None:
        raise InvalidConfig("record_rewards requires a reward evaluator")

    plan, initial = _plan_call(backend, prompt, context)
    violations = validate_against_context(plan, len(context))
    if violations:
        raise PlanInvalid(violations)

    logger.info(
        "episode planned",
        extra={"extra_fields": {"event": "EPISODE_START", "items": len(plan.items), "origin": plan.origin.value,
                                "context_size": len(context), "max_iterations": config.max_iterations}},
    )

    steps: List[EpisodeStep] = []
    current = initial
    terminated_by = TerminatedBy.MAX_ITERATIONS
    for k in range(1, config.max_iterations + 1):
        feedback, image = _refine_call(backend, k, prompt, context, plan, current)
        reward = scorer.evaluate(plan, context.images, image, prompt.text) if config.record_rewards else None
        steps.append(EpisodeStep(iteration=k, feedback=feedback, image=image, reward=reward))
        current = image

        logger.debug(
            "episode step",
            extra={"extra_fields": {"event": "EPISODE_STEP", "iteration": k, "satisfied": feedback.satisfied,
                                    "failed_items": list(feedback.failed_indices),
                                    "r_total": reward.r_total if reward is not None else None}},
        )
        if feedback.satisfied:
            terminated_by = TerminatedBy.SATISFIED
            break

    logger.info(
        "episode done",
        extra={"extra_fields": {"event": "EPISODE_DONE", "steps": len(steps), "terminated_by": terminated_by.value}},
    )
    return EpisodeTrace(
        config=config,
        prompt=prompt,
        context=context,
        plan=plan,
        initial_image=initial,
        steps=tuple(steps),
        final_image=current,
        terminated_by=terminated_by,
    )
