# -*- coding: utf-8 -*-
"""远程服务 JSON 客户端（生成后端 / 打分服务 / 标注服务共用）

- 单一端点 POST，请求/响应都是 {ok, ...} 文档，双向按 libs/schemas/wire/*.json 校验
- token 只来自环境变量（AppConfig），以 Bearer 头发送，不写日志
- 可重试错误（408/429/5xx/超时/连接失败）用 retry_call 做指数退避，其余立即抛出
"""

from __future__ import annotations

from typing import Any, Dict, Optional

import httpx

from libs.common.http_errors import ServiceHttpError, is_retryable_error, raise_for_service
from libs.common.logging import setup_logging
from libs.common.retry import retry_call
from libs.contracts.schema_validator import iter_errors

logger = setup_logging("service-client")


class ServiceClient:
    def __init__(
        self,
        *,
        service: str,
        base_url: str,
        token: str = "",
        path: str = "/v1/call",
        timeout_s: float = 30.0,
        max_attempts: int = 3,
        base_delay_sec: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        if not base_url:
            raise ServiceHttpError(service, None, "missing base url")
        self.service = service
        self.path = path
        self.max_attempts = int(max_attempts)
        self.base_delay_sec = float(base_delay_sec)
        headers = {"Content-Type": "application/json"}
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(base_url=base_url.rstrip("/"), headers=headers, timeout=timeout_s, transport=transport)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def _check(self, schema_path: str, doc: Any, direction: str) -> None:
        errors = iter_errors(schema_path, doc)
        if errors:
            err = errors[0]
            path = "/".join(str(p) for p in err.absolute_path) or "$"
            raise ServiceHttpError(self.service, None, f"{direction} schema violation at {path}: {err.message}", {})

    def call(self, request: Dict[str, Any], *, request_schema: str, response_schema: str) -> Dict[str, Any]:
        self._check(request_schema, request, "request")

        def _once() -> Dict[str, Any]:
            r = self._client.post(self.path, json=request)
            return raise_for_service(self.service, r)

        def _on_retry(attempt: int, exc: Exception, delay: float) -> None:
            logger.warning(
                "service call retry",
                extra={"extra_fields": {
                    "event": "SERVICE_RETRY",
                    "target": self.service,
                    "op": request.get("op"),
                    "attempt": attempt,
                    "delay_sec": round(delay, 3),
                    "error": str(exc),
                }},
            )

        data = retry_call(
            _once,
            retry_if=is_retryable_error,
            max_attempts=self.max_attempts,
            base_delay_sec=self.base_delay_sec,
            on_retry=_on_retry,
        )
        self._check(response_schema, data, "response")
        return data
