"""JSON Schema 校验器（契约优先）

所有文档（checklist / 反馈 / trace / 线协议 / 语料记录）的 schema 都在 libs/schemas/ 下，
跨文件 $ref 统一使用 https://schemas.local/ 前缀，通过本地 registry 解析，不走网络。
"""
from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List

from jsonschema import Draft202012Validator, ValidationError
from referencing import Registry, Resource
from referencing.jsonschema import DRAFT202012

SCHEMA_ROOT = Path(__file__).resolve().parent.parent / "schemas"
SCHEMA_BASE_URI = "https://schemas.local/"


@lru_cache(maxsize=1)
def _registry() -> Registry:
    """加载所有 schema 文件，按 $id（或相对路径 URL）注册"""
    resources = []
    for path in sorted(SCHEMA_ROOT.rglob("*.json")):
        schema = json.loads(path.read_text(encoding="utf-8"))
        url_path = path.relative_to(SCHEMA_ROOT).as_posix()
        schema_id = schema.get("$id", f"{SCHEMA_BASE_URI}{url_path}")
        resources.append((schema_id, Resource.from_contents(schema, default_specification=DRAFT202012)))
    return Registry().with_resources(resources)


@lru_cache(maxsize=128)
def _load_schema(schema_path: str) -> Dict[str, Any]:
    full = SCHEMA_ROOT / schema_path
    return json.loads(full.read_text(encoding="utf-8"))


@lru_cache(maxsize=128)
def _validator(schema_path: str) -> Draft202012Validator:
    return Draft202012Validator(_load_schema(schema_path), registry=_registry())


def _path_key(err: ValidationError):
    return tuple((0, p) if isinstance(p, int) else (1, str(p)) for p in err.absolute_path)


def iter_errors(schema_path: str, obj: Any) -> List[ValidationError]:
    """全部校验错误，按文档路径排序（数组下标按数值序）"""
    return sorted(_validator(schema_path).iter_errors(obj), key=_path_key)


def validate(schema_path: str, obj: Any) -> None:
    _validator(schema_path).validate(obj)


def is_valid(schema_path: str, obj: Any) -> bool:
    return _validator(schema_path).is_valid(obj)
