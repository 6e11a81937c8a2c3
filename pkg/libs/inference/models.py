# -*- coding: utf-8 -*-
"""推理引擎领域类型

- Prompt（T）、VisualContext（V = v_1..v_n，image_k 1-based 寻址）
- GenerationBackend：plan_and_generate / evaluate_and_refine 两个调用
- EpisodeTrace：一次迭代推理的完整记录（计划、每步反馈与图像、可选奖励）
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional, Protocol, Sequence, Tuple

from libs.common.images import ImageRef
from libs.inference.errors import InvalidConfig
from libs.plan.errors import EmptyPrompt
from libs.plan.models import Checklist, EvalFeedback, image_index
from libs.reward.composite import RewardBreakdown

DEFAULT_MAX_ITERATIONS = 3

_SEED_MIN = -(2**63)
_SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class Prompt:
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise EmptyPrompt("prompt must be non-empty")


@dataclass(frozen=True)
class VisualContext:
    images: Tuple[ImageRef, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))

    def __len__(self) -> int:
        return len(self.images)

    def __iter__(self) -> Iterator[ImageRef]:
        return iter(self.images)

    def __getitem__(self, i: int) -> ImageRef:
        return self.images[i]

    def resolve(self, ref_id: str) -> Optional[ImageRef]:
        k = image_index(ref_id)
        if k is None or k > len(self.images):
            return None
        return self.images[k - 1]


@dataclass(frozen=True)
class EngineConfig:
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    record_rewards: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.max_iterations, bool) or not isinstance(self.max_iterations, int) or self.max_iterations < 1:
            raise InvalidConfig(f"max_iterations must be an integer >= 1, got {self.max_iterations!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not (_SEED_MIN <= self.seed <= _SEED_MAX):
            raise InvalidConfig(f"seed must be a 64-bit integer, got {self.seed!r}")


class TerminatedBy(str, Enum):
    SATISFIED = "satisfied"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class EpisodeStep:
    iteration: int
    feedback: EvalFeedback
    image: ImageRef
    reward: Optional[RewardBreakdown] = None


@dataclass(frozen=True)
class EpisodeTrace:
    config: EngineConfig
    prompt: Prompt
    context: VisualContext
    plan: Checklist
    initial_image: ImageRef
    steps: Tuple[EpisodeStep, ...]
    final_image: ImageRef
    terminated_by: TerminatedBy

    @property
    def iterations(self) -> int:
        return len(self.steps)


class GenerationBackend(Protocol):
    def plan_and_generate(self, prompt: Prompt, context: VisualContext) -> Tuple[Checklist, ImageRef]: ...

    def evaluate_and_refine(
        self, prompt: Prompt, context: VisualContext, plan: Checklist, current: ImageRef
    ) -> Tuple[EvalFeedback, ImageRef]: ...


class RewardEvaluator(Protocol):
    def evaluate(self, plan: Checklist, context: Sequence[ImageRef], generated: ImageRef, prompt: str) -> RewardBreakdown: ...
