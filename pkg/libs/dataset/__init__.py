from libs.dataset.annotator import (
    AnnotatorClient,
    AnnotatorTransport,
    HttpAnnotatorTransport,
    RequestAnnotator,
    SimulatedAnnotatorTransport,
    parse_prompt_checks,
    simulated_annotator,
)
from libs.dataset.builders import build_correction, build_planning, sample_triples
from libs.dataset.cache import CachedTransport
from libs.dataset.degrader import DegradedGenerator, SimulatedDegrader
from libs.dataset.models import (
    BuildResult,
    CorrectionKind,
    CorrectionSample,
    FailureMode,
    PlanningSample,
    QuarantineRecord,
    RawTriple,
)
from libs.dataset.packing import PackedBatch, pack
from libs.dataset.sequence import (
    Modality,
    SampleKind,
    TrainingSegment,
    TrainingSequence,
    loss_pattern,
    regex_tokenizer,
    to_training_sequence,
)

__all__ = [
    "AnnotatorClient",
    "AnnotatorTransport",
    "BuildResult",
    "CachedTransport",
    "CorrectionKind",
    "CorrectionSample",
    "DegradedGenerator",
    "FailureMode",
    "HttpAnnotatorTransport",
    "Modality",
    "PackedBatch",
    "PlanningSample",
    "QuarantineRecord",
    "RawTriple",
    "RequestAnnotator",
    "SampleKind",
    "SimulatedAnnotatorTransport",
    "SimulatedDegrader",
    "TrainingSegment",
    "TrainingSequence",
    "build_correction",
    "build_planning",
    "loss_pattern",
    "pack",
    "parse_prompt_checks",
    "regex_tokenizer",
    "sample_triples",
    "simulated_annotator",
    "to_training_sequence",
]
