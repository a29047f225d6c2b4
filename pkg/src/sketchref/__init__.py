"""sketchref: evaluation harness for sketch synthesis.

Scores synthesized sketches against their reference photos along two
axes (recognizability and simplicity), aggregates the trade-off into
mRS@alpha benchmark tables, and ships the validation tooling used to
check the metrics against human judgments.
"""

from sketchref.core import (
    Domain,
    EmbeddingKind,
    EmbeddingRecord,
    EvalItem,
    ImageRecord,
    KeypointSchema,
    LoadError,
    PairingError,
    PredictionFile,
    SketchRefError,
    TargetKeypoints,
    Task,
    get_schema,
    load_embedding,
    load_image,
    load_manifest,
    load_predictions,
)

__version__ = "0.1.0"

__all__ = [
    "Domain",
    "EmbeddingKind",
    "EmbeddingRecord",
    "EvalItem",
    "ImageRecord",
    "KeypointSchema",
    "LoadError",
    "PairingError",
    "PredictionFile",
    "SketchRefError",
    "TargetKeypoints",
    "Task",
    "get_schema",
    "load_embedding",
    "load_image",
    "load_manifest",
    "load_predictions",
    "__version__",
]
