"""Thinging-machine modeling: static models, static changes, events."""

__version__ = "0.1.0"

from importlib import resources as _resources
from pathlib import Path as _Path

from .behavior import (
    BModel,
    Event,
    attach_time,
    event_catalog,
    project_to_fsm_trace,
    simulate,
)
from .core import (
    Diagnostic,
    FlowArc,
    SModel,
    Stage,
    StageKind,
    Thimac,
    TimeTag,
    TriggerArc,
    build_model,
    validate_s,
)
from .dsl import parse_flow_string, parse_model, print_model, to_flow_strings
from .fsm import FsmSpec, compile_fsm_to_s, fsm_run, fsm_step, load_fsm
from .statics import DModel, StaticChange, decompose, decompose_with_regions, order_changes



def corpus_path(name: str) -> _Path:
    """Path of a bundled model, FSM definition or script."""
    return _Path(str(_resources.files(__name__).joinpath("corpus", name)))


__all__ = [
    "BModel", "DModel", "Diagnostic", "Event", "FlowArc", "FsmSpec", "SModel", "Stage",
    "StageKind", "StaticChange", "Thimac", "TimeTag", "TriggerArc", "attach_time",
    "build_model", "corpus_path", "compile_fsm_to_s", "decompose", "decompose_with_regions",
    "event_catalog", "fsm_run", "fsm_step", "load_fsm", "order_changes",
    "parse_flow_string", "parse_model", "print_model", "project_to_fsm_trace",
    "simulate", "to_flow_strings", "validate_s",
]
