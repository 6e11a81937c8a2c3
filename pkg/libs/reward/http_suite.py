# -*- coding: utf-8 -*-
"""打分服务 HTTP 客户端：把真实检测/嵌入/文本打分模型包装成 ScorerSuite

线协议见 libs/schemas/wire/scorer-{request,response}.json。
"""

from __future__ import annotations

from typing import Any, Dict, Iterable, Optional

import httpx
import numpy as np

from libs.common.images import ImageRef
from libs.common.service_client import ServiceClient
from libs.reward.errors import ScorerFailure
from libs.reward.suite import BoundingBox, ScorerSuite

REQUEST_SCHEMA = "wire/scorer-request.json"
RESPONSE_SCHEMA = "wire/scorer-response.json"


class ScorerClient:
    def __init__(self, client: ServiceClient):
        self.client = client

    def _call(self, op: str, payload: Dict[str, Any]) -> Dict[str, Any]:
        return self.client.call({"op": op, "payload": payload}, request_schema=REQUEST_SCHEMA, response_schema=RESPONSE_SCHEMA)

    def detect(self, image: ImageRef, description: str) -> Optional[BoundingBox]:
        data = self._call("detect", {"image": image.to_document(), "text": description})
        box = data.get("box")
        if box is None:
            return None
        return BoundingBox(float(box["x0"]), float(box["y0"]), float(box["x1"]), float(box["y1"]), float(box["confidence"]))

    def embed_identity(self, image: ImageRef, box: BoundingBox) -> np.ndarray:
        crop = {"x0": box.x0, "y0": box.y0, "x1": box.x1, "y1": box.y1}
        return self._vector(self._call("embed_identity", {"image": image.to_document(), "crop": crop}))

    def embed_style(self, image: ImageRef) -> np.ndarray:
        return self._vector(self._call("embed_style", {"image": image.to_document()}))

    def score_text_image(self, text: str, image: ImageRef) -> float:
        return self._score(self._call("score_text_image", {"image": image.to_document(), "text": text}))

    def score_extra(self, name: str, text: str, image: ImageRef) -> float:
        return self._score(self._call("score_extra", {"image": image.to_document(), "text": text, "name": name}))

    @staticmethod
    def _vector(data: Dict[str, Any]) -> np.ndarray:
        if "vector" not in data:
            raise ScorerFailure("scorer response carries no vector")
        return np.asarray(data["vector"], dtype=np.float64)

    @staticmethod
    def _score(data: Dict[str, Any]) -> float:
        if "score" not in data:
            raise ScorerFailure("scorer response carries no score")
        return float(data["score"])


def http_suite(
    base_url: str,
    token: str = "",
    *,
    extras: Iterable[str] = ("pick",),
    timeout_s: float = 30.0,
    serial: bool = True,
    transport: Optional[httpx.BaseTransport] = None,
    base_delay_sec: float = 0.5,
) -> ScorerSuite:
    """serial 默认 True：远端服务并发能力未知"""
    client = ScorerClient(
        ServiceClient(
            service="scorer",
            base_url=base_url,
            token=token,
            path="/v1/score",
            timeout_s=timeout_s,
            transport=transport,
            base_delay_sec=base_delay_sec,
        )
    )

    def _extra(name: str):
        return lambda text, image: client.score_extra(name, text, image)

    return ScorerSuite(
        detector=client.detect,
        identity_embedder=client.embed_identity,
        style_embedder=client.embed_style,
        text_image_scorer=client.score_text_image,
        extras={name: _extra(name) for name in extras},
        serial=serial,
        name="http",
    )
