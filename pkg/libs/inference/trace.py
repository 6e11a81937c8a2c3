# -*- coding: utf-8 -*-
"""EpisodeTrace 导出/导入（schema: trace/episode-trace.json）

同一 (后端种子, 提示词, 上下文, 配置) 得到逐字节相同的导出文档。
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict

from libs.common.images import ImageRef
from libs.common.json import dumps_document, loads_document
from libs.contracts.schema_validator import iter_errors
from libs.inference.errors import TraceSchemaError
from libs.inference.models import EngineConfig, EpisodeStep, EpisodeTrace, Prompt, TerminatedBy, VisualContext
from libs.plan.codec import checklist_from_document, checklist_to_document, feedback_from_document, feedback_to_document
from libs.reward.composite import RewardBreakdown

TRACE_SCHEMA = "trace/episode-trace.json"


def trace_to_document(trace: EpisodeTrace) -> Dict[str, Any]:
    steps = []
    for s in trace.steps:
        d: Dict[str, Any] = {
            "iteration": s.iteration,
            "feedback": feedback_to_document(s.feedback),
            "image": s.image.to_document(),
        }
        if s.reward is not None:
            d["reward"] = s.reward.to_document()
        steps.append(d)
    return {
        "config": {
            "max_iterations": trace.config.max_iterations,
            "record_rewards": trace.config.record_rewards,
            "seed": trace.config.seed,
        },
        "prompt": trace.prompt.text,
        "context": [img.to_document() for img in trace.context],
        "plan": checklist_to_document(trace.plan),
        "initial_image": trace.initial_image.to_document(),
        "steps": steps,
        "final_image": trace.final_image.to_document(),
        "terminated_by": trace.terminated_by.value,
    }


def trace_from_document(doc: Any) -> EpisodeTrace:
    errors = iter_errors(TRACE_SCHEMA, doc)
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "$"
        raise TraceSchemaError(f"{path}: {err.message}")

    cfg = doc["config"]
    return EpisodeTrace(
        config=EngineConfig(max_iterations=cfg["max_iterations"], record_rewards=cfg["record_rewards"], seed=cfg["seed"]),
        prompt=Prompt(doc["prompt"]),
        context=VisualContext(tuple(ImageRef.from_document(d) for d in doc["context"])),
        plan=checklist_from_document(doc["plan"]),
        initial_image=ImageRef.from_document(doc["initial_image"]),
        steps=tuple(
            EpisodeStep(
                iteration=s["iteration"],
                feedback=feedback_from_document(s["feedback"]),
                image=ImageRef.from_document(s["image"]),
                reward=RewardBreakdown.from_document(s["reward"]) if "reward" in s else None,
            )
            for s in doc["steps"]
        ),
        final_image=ImageRef.from_document(doc["final_image"]),
        terminated_by=TerminatedBy(doc["terminated_by"]),
    )


def serialize_trace(trace: EpisodeTrace) -> str:
    return dumps_document(trace_to_document(trace))


def parse_trace(raw: str | bytes) -> EpisodeTrace:
    try:
        doc = loads_document(raw)
    except json.JSONDecodeError as e:
        raise TraceSchemaError(f"trace is not valid JSON: {e}") from e
    return trace_from_document(doc)


def write_trace(path: str | Path, trace: EpisodeTrace) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(serialize_trace(trace), encoding="utf-8")


def read_trace(path: str | Path) -> EpisodeTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))
