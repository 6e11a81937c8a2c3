"""结构化日志（JSON）

说明：
- 统一输出字段：ts_ms、level、logger、service、message、event，以及业务键。
- 业务键通过 extra={"extra_fields": {...}} 传入。
- CLI 场景输出到 stderr，stdout 只留给命令结果。
"""

from __future__ import annotations

import json
import logging
import os
import sys
import time
from typing import Any, Dict, Optional, TextIO


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        payload: Dict[str, Any] = {
            "ts_ms": int(time.time() * 1000),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if hasattr(record, "extra_fields") and isinstance(record.extra_fields, dict):
            payload.update(record.extra_fields)
        if record.exc_info:
            payload["exc"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False, default=str)


class _ServiceAdapter(logging.LoggerAdapter):
    """合并 service 字段与调用方传入的 extra_fields（默认 LoggerAdapter 会覆盖 extra）。"""

    def process(self, msg: Any, kwargs: Dict[str, Any]):
        fields = dict(self.extra.get("extra_fields", {}))
        extra = kwargs.get("extra") or {}
        fields.update(extra.get("extra_fields") or {})
        kwargs["extra"] = {**extra, "extra_fields": fields}
        return msg, kwargs


def setup_logging(service_name: str, *, stream: Optional[TextIO] = None, level: Optional[str] = None) -> logging.LoggerAdapter:
    logger = logging.getLogger(service_name)
    logger.setLevel((level or os.getenv("VACOT_LOG_LEVEL") or "INFO").upper())
    logger.propagate = False

    if not logger.handlers:
        handler = logging.StreamHandler(stream or sys.stderr)
        handler.setFormatter(JsonFormatter())
        logger.addHandler(handler)

    return _ServiceAdapter(logger, {"extra_fields": {"service": service_name}})
