# -*- coding: utf-8 -*-
"""D_planning / D_correction 构建

- 每个三元组/规划样本独立处理，可用线程池并发（executor.map 保持输入顺序）
- SchemaViolation / InvalidSample 写入隔离区（带阶段与原因），不静默丢弃
- AnnotatorUnavailable 等其它错误直接抛出，构建中止；配合缓存可续跑
- 所有随机性来自 seed_from(seed, sample_id, ...)，与并发度无关
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, Tuple, TypeVar, Union

import numpy as np

from libs.common.hashing import seed_from
from libs.common.logging import setup_logging
from libs.dataset.annotator import AnnotatorClient
from libs.dataset.degrader import DegradedGenerator
from libs.dataset.errors import DatasetError, InvalidSample, NegativeNotDegraded, SchemaViolation
from libs.dataset.models import (
    BuildResult,
    CorrectionKind,
    CorrectionSample,
    Degradation,
    PlanningSample,
    QuarantineRecord,
    RawTriple,
)
from libs.inference.models import Prompt, VisualContext
from libs.plan.models import satisfied_feedback

logger = setup_logging("dataset-builder")

T = TypeVar("T")
R = TypeVar("R")

_VARIATION_SEED_RANGE = 2**31
DEFAULT_NEGATIVE_ATTEMPTS = 4


def sample_triples(triples: Sequence[RawTriple], n: int, seed: int = 0) -> List[RawTriple]:
    """无放回抽取 n 个三元组，保持原始顺序；n >= 总数时原样返回"""
    if n < 0:
        raise DatasetError(f"sample size must be >= 0, got {n}")
    if n >= len(triples):
        return list(triples)
    rng = np.random.default_rng(seed_from(seed, "sample_triples", len(triples)))
    picked = np.sort(rng.choice(len(triples), size=n, replace=False))
    return [triples[int(i)] for i in picked]


def _fan_out(fn: Callable[[T], R], items: Sequence[T], workers: int) -> List[R]:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _quarantine(sample_id: str, stage: str, err: DatasetError) -> QuarantineRecord:
    logger.warning(
        "sample quarantined",
        extra={"extra_fields": {"event": "DATASET_QUARANTINE", "sample_id": sample_id, "stage": stage, "code": err.code}},
    )
    return QuarantineRecord(sample_id, stage, err.code, str(err))


def _collect(outcomes: Iterable[Union[QuarantineRecord, Tuple]]) -> BuildResult:
    samples: List = []
    quarantine: List[QuarantineRecord] = []
    for out in outcomes:
        if isinstance(out, QuarantineRecord):
            quarantine.append(out)
        else:
            samples.extend(out)
    return BuildResult(samples, quarantine)


def build_planning(triples: Sequence[RawTriple], annotator: AnnotatorClient, *, workers: int = 1) -> BuildResult:
    def _one(triple: RawTriple):
        prompt = Prompt(triple.prompt)
        context = VisualContext(triple.references)
        try:
            plan = annotator.annotate_plan(prompt, context)
            return (PlanningSample(triple.triple_id, prompt, context, plan, triple.ground_truth),)
        except (SchemaViolation, InvalidSample) as e:
            return _quarantine(triple.triple_id, "plan", e)

    result = _collect(_fan_out(_one, list(triples), workers))
    logger.info(
        "planning corpus built",
        extra={"extra_fields": {
            "event": "DATASET_BUILD_DONE",
            "corpus": "planning",
            "samples": len(result.samples),
            "quarantined": len(result.quarantine),
        }},
    )
    return result


def build_correction(
    planning: Sequence[PlanningSample],
    degrader: DegradedGenerator,
    annotator: AnnotatorClient,
    *,
    perfect_fraction: float,
    seed: int = 0,
    workers: int = 1,
    negative_attempts: int = DEFAULT_NEGATIVE_ATTEMPTS,
) -> BuildResult:
    """每个规划样本产出一个 Suboptimal；以概率 perfect_fraction 额外产出一个 Perfect

    负样本必须被判为不满足：被判满足时换下一个 variation seed 重新生成，
    negative_attempts 次都满足则以 NegativeNotDegraded 隔离（同时跳过 Perfect）。
    """
    if not math.isfinite(perfect_fraction) or not (0.0 <= perfect_fraction <= 1.0):
        raise DatasetError(f"perfect_fraction must lie in [0,1], got {perfect_fraction}")
    if negative_attempts < 1:
        raise DatasetError(f"negative_attempts must be >= 1, got {negative_attempts}")

    def _variation_seed(sample_id: str, attempt: int) -> int:
        if attempt == 0:
            return seed_from(seed, sample_id, "variation") % _VARIATION_SEED_RANGE
        return seed_from(seed, sample_id, "variation", attempt) % _VARIATION_SEED_RANGE

    def _suboptimal(sample: PlanningSample) -> CorrectionSample:
        describe = getattr(degrader, "degradation", None)
        for attempt in range(negative_attempts):
            variation_seed = _variation_seed(sample.sample_id, attempt)
            negative = degrader.generate_negative(sample.prompt, sample.context, sample.final_gt, variation_seed)
            eval_gt = annotator.annotate_eval(sample.prompt, sample.context, sample.plan_gt, negative, sample.final_gt)
            if not eval_gt.satisfied:
                degradation = describe(sample.final_gt, variation_seed) if describe else Degradation(variation_seed)
                return CorrectionSample(sample, negative, eval_gt, CorrectionKind.SUBOPTIMAL, degradation)
        raise NegativeNotDegraded(f"negative judged satisfied in all {negative_attempts} variations")

    def _one(sample: PlanningSample):
        out: List[CorrectionSample] = []
        try:
            out.append(_suboptimal(sample))
        except (SchemaViolation, InvalidSample) as e:
            return _quarantine(sample.sample_id, "eval", e)

        rng = np.random.default_rng(seed_from(seed, sample.sample_id, "perfect"))
        if rng.random() < perfect_fraction:
            out.append(CorrectionSample(sample, sample.final_gt, satisfied_feedback(sample.plan_gt), CorrectionKind.PERFECT))
        return tuple(out)

    result = _collect(_fan_out(_one, list(planning), workers))
    n_perfect = sum(1 for s in result.samples if s.kind == CorrectionKind.PERFECT)
    logger.info(
        "correction corpus built",
        extra={"extra_fields": {
            "event": "DATASET_BUILD_DONE",
            "corpus": "correction",
            "samples": len(result.samples),
            "perfect": n_perfect,
            "quarantined": len(result.quarantine),
        }},
    )
    return result
