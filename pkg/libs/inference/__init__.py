from libs.inference.engine import run_episode
from libs.inference.models import (
    EngineConfig,
    EpisodeStep,
    EpisodeTrace,
    GenerationBackend,
    Prompt,
    TerminatedBy,
    VisualContext,
)
from libs.inference.sim_backend import SimSpec, SimulatedBackend, simulated_backend
from libs.inference.trace import serialize_trace, trace_from_document, trace_to_document

__all__ = [
    "EngineConfig",
    "EpisodeStep",
    "EpisodeTrace",
    "GenerationBackend",
    "Prompt",
    "SimSpec",
    "SimulatedBackend",
    "TerminatedBy",
    "VisualContext",
    "run_episode",
    "serialize_trace",
    "simulated_backend",
    "trace_from_document",
    "trace_to_document",
]
