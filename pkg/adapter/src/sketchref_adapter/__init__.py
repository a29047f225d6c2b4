"""Producer of sketchref wire-format inputs: embeddings and keypoints."""
from .backends import (
    DarkRegionDetector,
    Detection,
    GridCentroidPose,
    PooledGridEmbedder,
    make_detector,
    make_embedder,
    make_pose_model,
)
from .config import (
    DOMAIN_SCHEMAS,
    SCHEMA_POINTS,
    AdapterConfig,
    AdapterError,
    config_from_dict,
    load_config,
)
from .images import GrayImage, load_grayscale
from .ops import detect_and_pose, embed_inputs
from .wire import (
    ManifestItem,
    atomic_write_json,
    image_id_for,
    read_manifest,
    validate_embedding_payload,
    validate_prediction_payload,
)

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "DarkRegionDetector",
    "Detection",
    "DOMAIN_SCHEMAS",
    "GrayImage",
    "GridCentroidPose",
    "ManifestItem",
    "PooledGridEmbedder",
    "SCHEMA_POINTS",
    "atomic_write_json",
    "config_from_dict",
    "detect_and_pose",
    "embed_inputs",
    "image_id_for",
    "load_config",
    "load_grayscale",
    "make_detector",
    "make_embedder",
    "make_pose_model",
    "read_manifest",
    "validate_embedding_payload",
    "validate_prediction_payload",
]
