# -*- coding: utf-8 -*-
"""标注服务客户端（AnnotatorClient）

分两层：
- AnnotatorTransport.send(request) -> document：只负责把线协议请求送出去、拿回文档字符串
  （HTTP / 模拟 / 录制回放缓存都实现这一层）
- RequestAnnotator：构造请求、按 consistency-plan 的 schema 解析文档

错误约定：
- 传输层最终失败（重试耗尽） -> AnnotatorUnavailable，构建中止（可续跑）
- 文档解析/校验失败 -> SchemaViolation，由构建器写入隔离区
"""

from __future__ import annotations

import re
import threading
from typing import Any, Dict, List, Optional, Protocol, Sequence, Tuple

import httpx

from libs.common.http_errors import ServiceHttpError
from libs.common.images import ImageRef
from libs.common.json import dumps_document
from libs.common.service_client import ServiceClient
from libs.dataset.errors import AnnotatorUnavailable, SchemaViolation
from libs.inference.models import Prompt, VisualContext
from libs.plan.codec import checklist_to_document, feedback_to_document, parse_checklist, parse_feedback, serialize
from libs.plan.errors import PlanError
from libs.plan.models import (
    CheckItem,
    Checklist,
    CheckType,
    EvalFeedback,
    ItemVerdict,
    PlanOrigin,
    fixed_template_plan,
    image_id,
    image_index,
)
from libs.plan.validation import validate_against_context, validate_feedback
from libs.reward.mock import mock_suite
from libs.reward.similarity import object_similarity, style_similarity
from libs.reward.suite import ScorerSuite

REQUEST_SCHEMA = "wire/annotator-request.json"
RESPONSE_SCHEMA = "wire/annotator-response.json"

PLAN_SYSTEM_PROMPT_ID = "plan-v1"
EVAL_SYSTEM_PROMPT_ID = "eval-v1"


class AnnotatorClient(Protocol):
    def annotate_plan(self, prompt: Prompt, context: VisualContext) -> Checklist: ...

    def annotate_eval(
        self, prompt: Prompt, context: VisualContext, plan: Checklist, negative: ImageRef, final_gt: ImageRef
    ) -> EvalFeedback: ...


class AnnotatorTransport(Protocol):
    def send(self, request: Dict[str, Any]) -> str: ...


# ----------------------------
# request builders
# ----------------------------

def plan_request(prompt: Prompt, context: VisualContext) -> Dict[str, Any]:
    return {
        "op": "plan",
        "prompt": prompt.text,
        "images": [img.to_document() for img in context],
        "system_prompt_id": PLAN_SYSTEM_PROMPT_ID,
    }


def eval_request(
    prompt: Prompt, context: VisualContext, plan: Checklist, negative: ImageRef, final_gt: ImageRef
) -> Dict[str, Any]:
    return {
        "op": "eval",
        "prompt": prompt.text,
        "images": [img.to_document() for img in context],
        "plan": serialize(plan),
        "negative": negative.to_document(),
        "gt": final_gt.to_document(),
        "system_prompt_id": EVAL_SYSTEM_PROMPT_ID,
    }


class RequestAnnotator:
    """AnnotatorClient over any AnnotatorTransport"""

    def __init__(self, transport: AnnotatorTransport):
        self.transport = transport

    def _send(self, request: Dict[str, Any]) -> str:
        try:
            return self.transport.send(request)
        except ServiceHttpError as e:
            raise AnnotatorUnavailable(f"annotator {request['op']} call failed: {e.message}") from e

    def annotate_plan(self, prompt: Prompt, context: VisualContext) -> Checklist:
        document = self._send(plan_request(prompt, context))
        try:
            plan = parse_checklist(document)
        except PlanError as e:
            raise SchemaViolation(f"plan document rejected: {e.code}: {e}") from e
        violations = validate_against_context(plan, len(context))
        if violations:
            raise SchemaViolation("plan document rejected: " + "; ".join(v.describe() for v in violations))
        return plan

    def annotate_eval(
        self, prompt: Prompt, context: VisualContext, plan: Checklist, negative: ImageRef, final_gt: ImageRef
    ) -> EvalFeedback:
        document = self._send(eval_request(prompt, context, plan, negative, final_gt))
        try:
            feedback = parse_feedback(document)
        except PlanError as e:
            raise SchemaViolation(f"eval document rejected: {e.code}: {e}") from e
        violations = validate_feedback(feedback, plan)
        if violations:
            raise SchemaViolation("eval document rejected: " + "; ".join(v.describe() for v in violations))
        return feedback


# ----------------------------
# HTTP transport
# ----------------------------

class HttpAnnotatorTransport:
    def __init__(
        self,
        base_url: str,
        token: str = "",
        *,
        timeout_s: float = 60.0,
        transport: Optional[httpx.BaseTransport] = None,
        base_delay_sec: float = 0.5,
    ):
        self.client = ServiceClient(
            service="annotator",
            base_url=base_url,
            token=token,
            path="/v1/annotate",
            timeout_s=timeout_s,
            transport=transport,
            base_delay_sec=base_delay_sec,
        )

    def send(self, request: Dict[str, Any]) -> str:
        data = self.client.call(request, request_schema=REQUEST_SCHEMA, response_schema=RESPONSE_SCHEMA)
        if "document" not in data:
            raise ServiceHttpError("annotator", None, "ok response without document", data)
        return str(data["document"])

    def close(self) -> None:
        self.client.close()


# ----------------------------
# simulated transport
# ----------------------------

_PHRASE = r"((?:[a-z][\w-]*\s+){0,2}[a-z][\w-]*)"
_ATTRIBUTE_RE = re.compile(r"\b(color|shape|size|material)\s+of\s+(?:the|a|an)\s+" + _PHRASE + r"\s+in\s+image_(\d+)", re.I)
_IDENTITY_RE = re.compile(r"\b(?:the|a|an)\s+" + _PHRASE + r"\s+in\s+image_(\d+)", re.I)
_STYLE_RE = re.compile(r"\bstyle\s+of\s+image_(\d+)", re.I)

STYLE_DESCRIPTION = "the artistic style"
SATISFACTION_THRESHOLD = 0.9


def _overlaps(span: Tuple[int, int], spans: Sequence[Tuple[int, int]]) -> bool:
    return any(span[0] < b and a < span[1] for a, b in spans)


def parse_prompt_checks(prompt: str, context_size: int) -> Checklist:
    """确定性的提示词解析规划器

    - "the X in image_k" -> Identity "the X"
    - "style of image_k" -> Style
    - "color|shape|size|material of the X in image_k" -> Attribute（覆盖其中的 identity 匹配）
    - 提示词未提到的参考图 -> Identity "the subject of image_k"
    - 没有参考图 -> 固定模板
    """
    if context_size == 0:
        return fixed_template_plan(prompt)

    found: List[Tuple[int, CheckItem]] = []
    mentioned = set()
    attribute_spans: List[Tuple[int, int]] = []

    for m in _ATTRIBUTE_RE.finditer(prompt):
        k = int(m.group(3))
        if 1 <= k <= context_size:
            noun = m.group(2).lower()
            attr = m.group(1).lower()
            found.append((m.start(), CheckItem.between(
                CheckType.ATTRIBUTE, image_id(k), f"the {noun}", target_description=f"the {attr} of the {noun}",
            )))
            attribute_spans.append(m.span())
            mentioned.add(k)

    for m in _IDENTITY_RE.finditer(prompt):
        k = int(m.group(2))
        if 1 <= k <= context_size and not _overlaps(m.span(), attribute_spans):
            found.append((m.start(), CheckItem.between(CheckType.IDENTITY, image_id(k), f"the {m.group(1).lower()}")))
            mentioned.add(k)

    for m in _STYLE_RE.finditer(prompt):
        k = int(m.group(1))
        if 1 <= k <= context_size:
            found.append((m.start(), CheckItem.between(CheckType.STYLE, image_id(k), STYLE_DESCRIPTION)))
            mentioned.add(k)

    found.sort(key=lambda p: p[0])
    items = [item for _, item in found]
    for k in range(1, context_size + 1):
        if k not in mentioned:
            items.append(CheckItem.between(CheckType.IDENTITY, image_id(k), f"the subject of image_{k}"))
    return Checklist(tuple(items), PlanOrigin.GROUND_TRUTH_ANNOTATION)


def judge_negative(
    plan: Checklist, context: Sequence[ImageRef], negative: ImageRef, final_gt: ImageRef, suite: ScorerSuite,
    threshold: float = SATISFACTION_THRESHOLD,
) -> EvalFeedback:
    """按打分器判定负样本：每项参考元素与负样本的相似度 >= threshold 视为满足"""
    if not plan.items:
        same = negative.digest() == final_gt.digest()
        critique = "matches the prompt" if same else "does not match the ground truth for the prompt"
        return EvalFeedback.from_verdicts(
            [ItemVerdict(0, same, critique, 1.0 if same else 0.0)],
            "" if same else "regenerate the image so it follows the prompt",
        )

    verdicts: List[ItemVerdict] = []
    edits: List[str] = []
    for i, item in enumerate(plan.items):
        reference = context[image_index(item.source.image_id) - 1]
        if item.check_type == CheckType.STYLE:
            score = style_similarity(suite, reference, negative)
        else:
            score = object_similarity(suite, reference, negative, item.source.description)
        ok = score >= threshold
        verdicts.append(ItemVerdict(i, ok, f"similarity {score:.4f} vs threshold {threshold}", round(score, 6)))
        if not ok:
            edits.append(f"restore {item.target.description} from {item.source.image_id}")
    return EvalFeedback.from_verdicts(verdicts, "; ".join(edits))


class SimulatedAnnotatorTransport:
    """离线标注器：规则规划 + 打分器判定，输出与真实服务同形的文档字符串"""

    def __init__(self, suite: Optional[ScorerSuite] = None, threshold: float = SATISFACTION_THRESHOLD):
        self.suite = suite or mock_suite(0)
        self.threshold = threshold
        self._lock = threading.Lock()
        self.calls = 0

    def send(self, request: Dict[str, Any]) -> str:
        with self._lock:
            self.calls += 1
        images = [ImageRef.from_document(d) for d in request.get("images", [])]
        if request["op"] == "plan":
            plan = parse_prompt_checks(request["prompt"], len(images))
            return dumps_document(checklist_to_document(plan))
        plan = parse_checklist(request["plan"])
        feedback = judge_negative(
            plan,
            images,
            ImageRef.from_document(request["negative"]),
            ImageRef.from_document(request["gt"]),
            self.suite,
            self.threshold,
        )
        return dumps_document(feedback_to_document(feedback))


def simulated_annotator(suite: Optional[ScorerSuite] = None) -> RequestAnnotator:
    return RequestAnnotator(SimulatedAnnotatorTransport(suite))
