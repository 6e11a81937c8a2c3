# -*- coding: utf-8 -*-
"""Z_plan / Z_eval 的规范文档编解码

- 先按 JSON Schema（plan/checklist.json、plan/eval-feedback.json）做结构校验，
  再把第一条校验错误翻译为领域错误（UnknownCheckType / MissingField / MalformedRegion）。
- 解析只做结构校验；“source 是否越界、target 是否为 GENERATED”等上下文规则由
  validation.validate_against_context 报告，不在这里抛错。
- serialize 输出规范 JSON（键排序、紧凑、换行结尾），parse(serialize(x)) == x。
"""

from __future__ import annotations

import json
from typing import Any, Dict, List, Optional, Union

from jsonschema import ValidationError

from libs.common.json import dumps_document, loads_document
from libs.contracts.schema_validator import iter_errors
from libs.plan.errors import FeedbackSchemaError, MalformedRegion, MissingField, PlanSchemaError, UnknownCheckType
from libs.plan.models import CheckItem, Checklist, CheckType, ElementRef, EvalFeedback, ItemVerdict, PlanOrigin, Region

CHECKLIST_SCHEMA = "plan/checklist.json"
FEEDBACK_SCHEMA = "plan/eval-feedback.json"

Raw = Union[str, bytes, Dict[str, Any]]


def _fmt_path(path: List[Any]) -> str:
    out = "$"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _to_document(raw: Raw, schema_error) -> Any:
    if isinstance(raw, dict):
        return raw
    try:
        return loads_document(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise schema_error("$", f"not valid JSON: {e}") from e


def _missing_key(err: ValidationError) -> str:
    inst = err.instance if isinstance(err.instance, dict) else {}
    for key in err.validator_value or []:
        if key not in inst:
            return str(key)
    return "?"


def _raise_checklist_error(err: ValidationError) -> None:
    path = list(err.absolute_path)
    idx: Optional[int] = None
    if len(path) >= 2 and path[0] == "items" and isinstance(path[1], int):
        idx = path[1]

    if idx is not None:
        rest = path[2:]
        if "region" in rest:
            raise MalformedRegion(idx, err.message)
        if rest == ["check_type"]:
            raise UnknownCheckType(idx, err.instance)
        if err.validator == "required":
            field = _missing_key(err)
            if rest:
                field = ".".join(str(p) for p in rest) + "." + field
            raise MissingField(idx, field)

    raise PlanSchemaError(_fmt_path(path), err.message)


# ----------------------------
# Checklist
# ----------------------------

def _region_to_doc(r: Region) -> Dict[str, float]:
    return {"x0": r.x0, "y0": r.y0, "x1": r.x1, "y1": r.y1}


def _ref_to_doc(ref: ElementRef) -> Dict[str, Any]:
    doc: Dict[str, Any] = {"image_id": ref.image_id, "description": ref.description}
    if ref.region is not None:
        doc["region"] = _region_to_doc(ref.region)
    return doc


def checklist_to_document(plan: Checklist) -> Dict[str, Any]:
    return {
        "items": [
            {"check_type": it.check_type.value, "source": _ref_to_doc(it.source), "target": _ref_to_doc(it.target)}
            for it in plan.items
        ],
        "origin": plan.origin.value,
    }


def _ref_from_doc(doc: Dict[str, Any], item_index: int) -> ElementRef:
    region = None
    if "region" in doc:
        r = doc["region"]
        try:
            region = Region(float(r["x0"]), float(r["y0"]), float(r["x1"]), float(r["y1"]))
        except MalformedRegion as e:
            raise MalformedRegion(item_index, e.detail) from e
    return ElementRef(image_id=doc["image_id"], description=doc["description"], region=region)


def checklist_from_document(doc: Any) -> Checklist:
    errors = iter_errors(CHECKLIST_SCHEMA, doc)
    if errors:
        _raise_checklist_error(errors[0])

    items = []
    for i, it in enumerate(doc["items"]):
        items.append(
            CheckItem(
                check_type=CheckType(it["check_type"]),
                source=_ref_from_doc(it["source"], i),
                target=_ref_from_doc(it["target"], i),
            )
        )
    return Checklist(items=tuple(items), origin=PlanOrigin(doc["origin"]))


def parse_checklist(raw: Raw) -> Checklist:
    return checklist_from_document(_to_document(raw, PlanSchemaError))


def serialize(plan: Checklist) -> str:
    return dumps_document(checklist_to_document(plan))


# ----------------------------
# EvalFeedback
# ----------------------------

def feedback_to_document(fb: EvalFeedback) -> Dict[str, Any]:
    verdicts = []
    for v in fb.verdicts:
        d: Dict[str, Any] = {"item_index": v.item_index, "satisfied": v.satisfied, "critique": v.critique}
        if v.score is not None:
            d["score"] = v.score
        verdicts.append(d)
    return {"verdicts": verdicts, "satisfied": fb.satisfied, "edit_instruction": fb.edit_instruction}


def feedback_from_document(doc: Any) -> EvalFeedback:
    errors = iter_errors(FEEDBACK_SCHEMA, doc)
    if errors:
        err = errors[0]
        raise FeedbackSchemaError(_fmt_path(list(err.absolute_path)), err.message)
    verdicts = tuple(
        ItemVerdict(
            item_index=int(v["item_index"]),
            satisfied=bool(v["satisfied"]),
            critique=v["critique"],
            score=float(v["score"]) if "score" in v else None,
        )
        for v in doc["verdicts"]
    )
    return EvalFeedback(verdicts=verdicts, satisfied=bool(doc["satisfied"]), edit_instruction=doc["edit_instruction"])


def parse_feedback(raw: Raw) -> EvalFeedback:
    return feedback_from_document(_to_document(raw, FeedbackSchemaError))


def serialize_feedback(fb: EvalFeedback) -> str:
    return dumps_document(feedback_to_document(fb))
