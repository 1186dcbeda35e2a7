"""Animal-consideration evaluation harness.

Thin Python surface over the C++ core: corpus expansion, offline mock model
runs, S1/S2 score parsing, and analytics over stored run directories.
"""

from ._core import (
    Corpus,
    EvalScore,
    InputTemplate,
    ParseOutcome,
    Perspective,
    QueryInstance,
    ValidationError,
    aggregate,
    clusters,
    compare,
    evaluate_run,
    expand,
    generate_run,
    heatmap,
    load_corpus,
    mock_complete,
    parse_scores,
    regenerate,
    render_query,
    validate_score_range,
)

__all__ = [
    "Corpus",
    "EvalScore",
    "InputTemplate",
    "ParseOutcome",
    "Perspective",
    "QueryInstance",
    "ValidationError",
    "aggregate",
    "clusters",
    "compare",
    "evaluate_run",
    "expand",
    "generate_run",
    "heatmap",
    "load_corpus",
    "mock_complete",
    "parse_scores",
    "regenerate",
    "render_query",
    "validate_score_range",
]
