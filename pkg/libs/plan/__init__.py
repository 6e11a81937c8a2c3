from libs.plan.codec import parse_checklist, parse_feedback, serialize, serialize_feedback
from libs.plan.models import (
    GENERATED,
    CheckItem,
    Checklist,
    CheckType,
    ElementRef,
    EvalFeedback,
    ItemVerdict,
    PlanOrigin,
    Region,
    fixed_template_plan,
    image_id,
    satisfied_feedback,
)
from libs.plan.validation import Violation, ViolationKind, validate_against_context, validate_feedback

__all__ = [
    "GENERATED",
    "CheckItem",
    "Checklist",
    "CheckType",
    "ElementRef",
    "EvalFeedback",
    "ItemVerdict",
    "PlanOrigin",
    "Region",
    "Violation",
    "ViolationKind",
    "fixed_template_plan",
    "image_id",
    "parse_checklist",
    "parse_feedback",
    "satisfied_feedback",
    "serialize",
    "serialize_feedback",
    "validate_against_context",
    "validate_feedback",
]
