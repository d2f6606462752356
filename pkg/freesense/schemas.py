from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class DwtParamsModel(BaseModel):
    wavelet: str = "db2"
    mode: str = "symmetric"
    level: Optional[int] = None
    target_len: int = 128


class FeatureSetMeta(BaseModel):
    """JSON sidecar written next to every feature / gallery CSV."""

    model_config = ConfigDict(extra="forbid")

    p: int = Field(..., ge=1)
    n_pairs: int = Field(..., ge=1)
    dwt: DwtParamsModel
    level: Optional[int] = Field(None, ge=0)
    config_hash: Optional[str] = None
    n_features: int = 0
    subjects: List[str] = Field(default_factory=list)


class SubjectProfileModel(BaseModel):
    subject: str
    duration_mean: float
    duration_sigma: float
    edge_width: float
    skew: float
    band_low_hz: float
    band_high_hz: float
    harmonic_weight: float
    shadow_depth: float
    phase: float
    coupling: List[List[float]]


class CrossingModel(BaseModel):
    onset_s: float
    subject: str
    direction: str = "ltr"


class TraceEntry(BaseModel):
    trace: str
    labels: str
    seed: int
    crossings: List[CrossingModel]


class CorpusManifest(BaseModel):
    seed: int
    separation: float
    sample_rate_hz: float
    n_tx: int
    n_rx: int
    n_subcarriers: int
    noise_sigma: float
    drift_amplitude: float
    drift_period_s: float
    profiles: List[SubjectProfileModel]
    traces: List[TraceEntry]


class RunManifest(BaseModel):
    command: str
    version: str
    config: Dict[str, Any]
    config_hash: str
    seeds: Dict[str, int] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)


class Identification(BaseModel):
    j_begin: int
    j_end: int
    predicted: str
    neighbors: List[Dict[str, Any]]
