# -*- coding: utf-8 -*-
"""HTTP 生成后端适配器

把真实统一模型服务包装成 GenerationBackend。计划与反馈以规范文档字符串往返
（见 libs/schemas/wire/backend-*.json），重试在这里做，引擎本身不重试。
"""

from __future__ import annotations

from typing import Any, Dict, Optional, Tuple

import httpx

from libs.common.images import ImageRef
from libs.common.service_client import ServiceClient
from libs.inference.errors import EngineError
from libs.inference.models import Prompt, VisualContext
from libs.plan.codec import parse_checklist, parse_feedback, serialize
from libs.plan.models import Checklist, EvalFeedback

REQUEST_SCHEMA = "wire/backend-request.json"
RESPONSE_SCHEMA = "wire/backend-response.json"


class BackendProtocolError(EngineError):
    code = "BackendProtocolError"


class HttpGenerationBackend:
    def __init__(
        self,
        base_url: str,
        token: str = "",
        *,
        timeout_s: float = 120.0,
        transport: Optional[httpx.BaseTransport] = None,
        base_delay_sec: float = 0.5,
    ):
        self.client = ServiceClient(
            service="backend",
            base_url=base_url,
            token=token,
            path="/v1/generate",
            timeout_s=timeout_s,
            transport=transport,
            base_delay_sec=base_delay_sec,
        )

    def _call(self, request: Dict[str, Any]) -> Dict[str, Any]:
        return self.client.call(request, request_schema=REQUEST_SCHEMA, response_schema=RESPONSE_SCHEMA)

    @staticmethod
    def _require(data: Dict[str, Any], key: str, op: str) -> Any:
        if key not in data:
            raise BackendProtocolError(f"{op} response is missing {key!r}")
        return data[key]

    def plan_and_generate(self, prompt: Prompt, context: VisualContext) -> Tuple[Checklist, ImageRef]:
        data = self._call({
            "op": "plan_and_generate",
            "prompt": prompt.text,
            "images": [img.to_document() for img in context],
        })
        plan = parse_checklist(self._require(data, "plan", "plan_and_generate"))
        image = ImageRef.from_document(self._require(data, "image", "plan_and_generate"))
        return plan, image

    def evaluate_and_refine(
        self, prompt: Prompt, context: VisualContext, plan: Checklist, current: ImageRef
    ) -> Tuple[EvalFeedback, ImageRef]:
        data = self._call({
            "op": "evaluate_and_refine",
            "prompt": prompt.text,
            "images": [img.to_document() for img in context],
            "plan": serialize(plan),
            "current": current.to_document(),
        })
        feedback = parse_feedback(self._require(data, "feedback", "evaluate_and_refine"))
        image = ImageRef.from_document(self._require(data, "image", "evaluate_and_refine"))
        return feedback, image
