"""Hallucination detection and quality scoring for generated video."""

from .bench import (
    dataset_stats,
    evaluate,
    load_annotations,
    prediction_from_report,
    run_benchmark,
)
from .config import Config, load_config
from .errors import (
    ConfigError,
    ContractError,
    GatewayError,
    HalluscanError,
    InputError,
    ValidationError,
)
from .frames import FrameSet, extract_features, frame_distance, ingest, synthetic_frameset
from .gateway import CallLedger, Gateway, GatewayRequest, estimate_cost
from .keyframes import (
    build_clusters,
    choose_dc,
    density_stats,
    extract_detail_frames,
    pairwise_distances,
    select_keyframes,
)
from .pipeline import run_detect, select_clusters
from .report import canonical_json, parse as parse_report, render as render_report
from .report import validate_report
from .scoring import aggregate, duration_weights, video_quality_score

__version__ = "0.1.0"

__all__ = [
    "CallLedger",
    "Config",
    "ConfigError",
    "ContractError",
    "FrameSet",
    "Gateway",
    "GatewayError",
    "GatewayRequest",
    "HalluscanError",
    "InputError",
    "ValidationError",
    "__version__",
    "aggregate",
    "build_clusters",
    "canonical_json",
    "choose_dc",
    "dataset_stats",
    "density_stats",
    "duration_weights",
    "estimate_cost",
    "evaluate",
    "extract_detail_frames",
    "extract_features",
    "frame_distance",
    "ingest",
    "load_annotations",
    "load_config",
    "pairwise_distances",
    "parse_report",
    "prediction_from_report",
    "render_report",
    "run_benchmark",
    "run_detect",
    "select_clusters",
    "select_keyframes",
    "synthetic_frameset",
    "validate_report",
    "video_quality_score",
]
