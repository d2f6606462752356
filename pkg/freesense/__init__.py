"""WiFi CSI human identification: filter, PCA, MAD segmentation, D4 features, DTW k-NN."""

__version__ = "0.1.0"

from .classifier import Gallery, IdentificationResult, dtw_distance, ensemble_distance, knn_classify  # noqa: E402
from .config import PipelineConfig, resolve_config  # noqa: E402
from .errors import ConfigError, DomainError, FreeSenseError, StageError, TraceFormatError  # noqa: E402
from .features import DwtParams, ShapeFeature, dwt_compress, extract_los_waveform  # noqa: E402
from .pca import ComponentSet, pca_project, reorder_by_peak_to_peak  # noqa: E402
from .preprocessing import FilterSpec, apply_filter, cutoff_from_hz, design_lowpass, filter_trace  # noqa: E402
from .segmentation import detect_segments, mad_profile, segmentation_metrics  # noqa: E402
from .trace import CsiTrace, Segment, SegmentLabel, read_trace, write_trace  # noqa: E402

__all__ = [
    "ComponentSet",
    "ConfigError",
    "CsiTrace",
    "DomainError",
    "DwtParams",
    "FilterSpec",
    "FreeSenseError",
    "Gallery",
    "IdentificationResult",
    "PipelineConfig",
    "Segment",
    "SegmentLabel",
    "ShapeFeature",
    "StageError",
    "TraceFormatError",
    "apply_filter",
    "cutoff_from_hz",
    "design_lowpass",
    "detect_segments",
    "dtw_distance",
    "dwt_compress",
    "ensemble_distance",
    "extract_los_waveform",
    "filter_trace",
    "knn_classify",
    "mad_profile",
    "pca_project",
    "read_trace",
    "reorder_by_peak_to_peak",
    "resolve_config",
    "segmentation_metrics",
    "write_trace",
]
