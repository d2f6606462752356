import hashlib
from pathlib import Path
from typing import Annotated, Any, Dict, Iterable, List, Literal, Optional, get_args

import yaml
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError


class Settings(BaseSettings):
    PROJECT_NAME: str = "FreeSense"
    VERSION: str = "0.1.0"

    N_JOBS: int = 1
    LOG_LEVEL: str = "INFO"
    RUN_ROOT: str = "runs"
    SHOW_PROGRESS: bool = True

    model_config = SettingsConfigDict(env_file=".env", env_prefix="FREESENSE_", case_sensitive=False)


def get_settings() -> Settings:
    return Settings()


settings = get_settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class FilterSection(_Section):
    order: int = Field(4, ge=1)
    cutoff_hz: float = Field(10.0, gt=0)
    zero_phase: bool = False
    initial: Literal["zero", "steady"] = "steady"


class PcaSection(_Section):
    components: int = Field(4, ge=1)


class SegSection(_Section):
    window: int = Field(500, ge=2)
    t1: Optional[float] = Field(None, gt=0)
    t2: Optional[float] = Field(None, gt=0)
    t1_percentile: float = Field(90.0, ge=0, le=100)
    t2_percentile: float = Field(40.0, ge=0, le=100)
    timelen1: int = Field(500, ge=1)
    timelen2: int = Field(4000, ge=1)
    match_tol: Optional[int] = Field(None, ge=0)
    pool_pairs: bool = True
    baseline: Literal["none", "wikey"] = "none"
    baseline_percentile: float = Field(65.0, ge=0, le=100)

    @model_validator(mode="after")
    def check_ordering(self) -> "SegSection":
        if self.t1 is not None and self.t2 is not None and not self.t1 > self.t2:
            raise ValueError("seg.t1 must be greater than seg.t2")
        if (self.t1 is None) != (self.t2 is None):
            raise ValueError("seg.t1 and seg.t2 must be set together")
        if not self.t1_percentile > self.t2_percentile:
            raise ValueError("seg.t1_percentile must be greater than seg.t2_percentile")
        if not self.timelen1 < self.timelen2:
            raise ValueError("seg.timelen1 must be less than seg.timelen2")
        return self

    @property
    def tolerance(self) -> int:
        return self.window if self.match_tol is None else self.match_tol


class DwtSection(_Section):
    wavelet: Literal["db2"] = "db2"
    mode: Literal["symmetric"] = "symmetric"
    level: Optional[int] = Field(None, ge=0)
    target_len: int = Field(128, ge=1)


class KnnSection(_Section):
    k: int = Field(3, ge=1)


class DtwSection(_Section):
    band: int = Field(0, ge=0)


def _int_list(value: Any) -> Any:
    if isinstance(value, str):
        return [int(v) for v in value.split(",") if v.strip()]
    return value


IntList = Annotated[List[int], BeforeValidator(_int_list)]


class EvalSection(_Section):
    seed: int = 42
    max_subsets: int = Field(200, ge=1)
    train_per_subject: int = Field(20, ge=1)
    test_per_subject: int = Field(20, ge=1)
    train_sizes: IntList = Field(default_factory=lambda: [10, 20, 30])
    subject_counts: Optional[IntList] = None

    @field_validator("train_sizes")
    @classmethod
    def check_train_sizes(cls, value: List[int]) -> List[int]:
        if not value or any(v < 1 for v in value):
            raise ValueError("eval.train_sizes must be a nonempty list of positive integers")
        return value

    @field_validator("subject_counts")
    @classmethod
    def check_subject_counts(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is not None and (not value or any(v < 2 for v in value)):
            raise ValueError("eval.subject_counts entries must be at least 2")
        return value


class SynthSection(_Section):
    seed: int = 42
    subjects: int = Field(6, ge=1)
    separation: float = Field(0.7, ge=0, le=1)
    samples_per_subject: int = Field(40, ge=1)
    n_traces: Optional[int] = Field(None, ge=1)
    sample_rate_hz: float = Field(1000.0, gt=0)
    n_tx: int = Field(2, ge=1)
    n_rx: int = Field(3, ge=1)
    n_subcarriers: int = Field(30, ge=1)
    noise_sigma: float = Field(0.05, ge=0)
    drift_amplitude: float = Field(0.02, ge=0)
    drift_period_s: float = Field(20.0, gt=0)
    lead_s: float = Field(0.85, ge=0)
    tail_s: float = Field(0.85, ge=0)
    quiet_ratio: float = Field(0.33, ge=0)
    rtl_fraction: float = Field(0.0, ge=0, le=1)


class PipelineConfig(_Section):
    filter: FilterSection = Field(default_factory=FilterSection)
    pca: PcaSection = Field(default_factory=PcaSection)
    seg: SegSection = Field(default_factory=SegSection)
    dwt: DwtSection = Field(default_factory=DwtSection)
    knn: KnnSection = Field(default_factory=KnnSection)
    dtw: DtwSection = Field(default_factory=DtwSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    synth: SynthSection = Field(default_factory=SynthSection)

    def flat(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {}
        for section in type(self).model_fields:
            values = getattr(self, section).model_dump()
            for key in values:
                out[f"{section}.{key}"] = values[key]
        return dict(sorted(out.items()))

    def to_text(self) -> str:
        return "".join(f"{key}={_format_value(value)}\n" for key, value in self.flat().items())

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


NULL_TOKENS = ("none", "null", "")


def _accepts_none(field_info) -> bool:
    return type(None) in get_args(field_info.annotation)


def _coerce_null(value: Any, field_info) -> Any:
    # "none" is only a null for Optional fields; elsewhere it may be a literal value.
    if isinstance(value, str) and value.lower() in NULL_TOKENS and _accepts_none(field_info):
        return None
    return value


def load_from_yaml(path: str) -> Dict[str, Any]:
    config_path = Path(path)
    if not config_path.exists():
        return {}
    with open(config_path, "r") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            for sub, sub_value in value.items():
                flat[f"{key}.{sub}"] = sub_value
        else:
            flat[str(key)] = value
    return flat


def parse_key_values(lines: Iterable[str], source: str = "<config>") -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        values[key] = value.strip()
    return values


def load_config_file(path: str) -> Dict[str, Any]:
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigError(f"config file not found: {path}")
    if config_path.suffix in (".yaml", ".yml"):
        return load_from_yaml(path)
    return parse_key_values(config_path.read_text().splitlines(), source=str(config_path))


def _nest(flat: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    nested: Dict[str, Dict[str, Any]] = {}
    sections = PipelineConfig.model_fields
    for key, value in flat.items():
        section, _, field = key.partition(".")
        if section not in sections or not field:
            raise ConfigError(f"unknown config key: {key}", key=key)
        model = sections[section].annotation
        if field not in model.model_fields:
            raise ConfigError(f"unknown config key: {key}", key=key)
        nested.setdefault(section, {})[field] = _coerce_null(value, model.model_fields[field])
    return nested


def build_config(flat: Dict[str, Any]) -> PipelineConfig:
    try:
        return PipelineConfig.model_validate(_nest(flat))
    except ValidationError as exc:
        err = exc.errors()[0]
        key = ".".join(str(part) for part in err["loc"])
        raise ConfigError(f"invalid value for {key or 'config'}: {err['msg']}", key=key or None) from exc


def resolve_config(path: Optional[str] = None, overrides: Iterable[str] = ()) -> PipelineConfig:
    """Defaults, then the config file, then ``key=value`` overrides."""
    flat: Dict[str, Any] = {}
    if path:
        flat.update(load_config_file(path))
    flat.update(parse_key_values(overrides, source="--set"))
    return build_config(flat)
