# -*- coding: utf-8 -*-
"""远程服务错误与可重试判定

远程服务（生成后端、打分服务、标注服务）统一抛出 ServiceHttpError。
采用“保守可重试集合”：
- HTTP 408 / 429 / 5xx
- 网络层异常：超时、连接失败、连接重置
- 服务返回 ok=false 且错误信息表现为繁忙/限流/超时（字符串匹配）
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import httpx


@dataclass
class ServiceHttpError(Exception):
    service: str
    http_status: Optional[int]
    message: str
    raw: Dict[str, Any] = field(default_factory=dict)

    def __str__(self) -> str:
        return f"ServiceHttpError(service={self.service}, http={self.http_status}, msg={self.message})"


def is_retryable_error(exc: Exception) -> bool:
    if isinstance(exc, ServiceHttpError):
        if exc.http_status in (408, 429, 500, 502, 503, 504):
            return True
        msg = (exc.message or "").lower()
        return any(k in msg for k in ["too many", "rate", "busy", "timeout", "tempor", "overload"])

    if isinstance(exc, (httpx.TimeoutException, httpx.NetworkError)):
        return True

    s = str(exc).lower()
    return any(k in s for k in ["timed out", "timeout", "tempor", "connection", "reset"])


def raise_for_service(service: str, response: httpx.Response) -> Dict[str, Any]:
    """解析 {ok, ..., error?} 形式的响应；非 2xx 或 ok=false 抛 ServiceHttpError。"""
    try:
        data = response.json()
    except ValueError:
        data = {}
    if response.status_code // 100 != 2:
        raise ServiceHttpError(service, response.status_code, str(data.get("error") or response.text[:200]), data)
    if not isinstance(data, dict) or not data.get("ok", False):
        err = data.get("error") if isinstance(data, dict) else "malformed response"
        raise ServiceHttpError(service, response.status_code, str(err or "ok=false"), data if isinstance(data, dict) else {})
    return data
