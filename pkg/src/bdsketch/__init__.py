"""Bounded-deletion streaming sketches."""

from .compiled import CompiledSpaceSaving
from .dyadic import DyadicSketch, dcs_new, dcs_with_cells, dss_capacity, dss_new
from .errors import (
    EmptySketchError,
    GuaranteeViolation,
    ModelViolationError,
    ParameterError,
    SketchError,
    StreamParseError,
)
from .evaluation import EvalReport, evaluate_stream, run_experiment, sweep
from .linear import LinearKind, LinearSketch, count_median, count_min
from .oracle import ExactCounter
from .spacesaving import SketchConfig, SketchPolicy, SpaceSavingSketch, capacity_for
from .stream import Stream, adversarial_stream, gen_binomial, gen_zipf, generate, load_stream, save_stream

__all__ = [
    "CompiledSpaceSaving",
    "DyadicSketch",
    "EmptySketchError",
    "EvalReport",
    "ExactCounter",
    "GuaranteeViolation",
    "LinearKind",
    "LinearSketch",
    "ModelViolationError",
    "ParameterError",
    "SketchConfig",
    "SketchError",
    "SketchPolicy",
    "SpaceSavingSketch",
    "Stream",
    "StreamParseError",
    "adversarial_stream",
    "capacity_for",
    "count_median",
    "count_min",
    "dcs_new",
    "dcs_with_cells",
    "dss_capacity",
    "dss_new",
    "evaluate_stream",
    "gen_binomial",
    "gen_zipf",
    "generate",
    "load_stream",
    "run_experiment",
    "save_stream",
    "sweep",
]
