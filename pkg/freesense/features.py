import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import pywt

from .errors import DomainError
from .pca import ComponentSet
from .schemas import DwtParamsModel, FeatureSetMeta
from .trace import Segment

logger = logging.getLogger(__name__)

# Daubechies D4 ("db2") analysis low-pass taps.
D4_LOWPASS = np.array(
    [
        -0.129409522551260,
        0.224143868042013,
        0.836516303737808,
        0.482962913144534,
    ]
)


def _check_taps() -> None:
    reference = np.asarray(pywt.Wavelet("db2").dec_lo)
    if not np.allclose(reference, D4_LOWPASS, rtol=0, atol=1e-10):
        raise RuntimeError("PyWavelets db2 taps disagree with the D4 constants")
    if abs(float(np.sum(D4_LOWPASS**2)) - 1.0) > 1e-12:
        raise RuntimeError("D4 low-pass taps are not unit norm")


_check_taps()


@dataclass(frozen=True)
class DwtParams:
    wavelet: str = "db2"
    mode: str = "symmetric"
    level: Optional[int] = None
    target_len: int = 128

    def __post_init__(self):
        if self.wavelet != "db2":
            raise DomainError(f"only the D4 (db2) wavelet is supported, got {self.wavelet!r}")
        if self.mode not in pywt.Modes.modes:
            raise DomainError(f"unknown extension mode {self.mode!r}")
        if self.level is not None and self.level < 0:
            raise DomainError(f"level must be nonnegative, got {self.level}")
        if self.target_len < 1:
            raise DomainError(f"target_len must be positive, got {self.target_len}")

    @classmethod
    def from_config(cls, section) -> "DwtParams":
        return cls(section.wavelet, section.mode, section.level, section.target_len)

    def to_model(self) -> DwtParamsModel:
        return DwtParamsModel(wavelet=self.wavelet, mode=self.mode, level=self.level, target_len=self.target_len)


@dataclass(frozen=True, eq=False)
class LosWaveform:
    segment: Segment
    waveforms: np.ndarray = field(repr=False)

    @property
    def length(self) -> int:
        return int(self.waveforms.shape[-1])


@dataclass(frozen=True, eq=False)
class ShapeFeature:
    coefficients: np.ndarray = field(repr=False)
    level: int
    original_length: int
    params: DwtParams = DwtParams()

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=np.float64, copy=True)
        if coeffs.ndim != 3 or coeffs.shape[2] == 0:
            raise DomainError(f"coefficients must be pairs x p x n (n > 0), got {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("feature coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def n_pairs(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def p(self) -> int:
        return int(self.coefficients.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ShapeFeature):
            return NotImplemented
        return (
            self.level == other.level
            and self.original_length == other.original_length
            and self.params == other.params
            and np.array_equal(self.coefficients, other.coefficients)
        )

    __hash__ = None


@dataclass(frozen=True)
class LabeledFeature:
    sample: str
    subject: str
    feature: ShapeFeature
    direction: str = "ltr"


def extract_los_waveform(components: ComponentSet, segment: Segment) -> LosWaveform:
    if segment.j_end > components.n_samples:
        raise DomainError(f"segment <{segment.j_begin}, {segment.j_end}> exceeds {components.n_samples} samples")
    return LosWaveform(segment, components.waveforms[:, :, segment.j_begin : segment.j_end].copy())


def resolve_level(length: int, params: DwtParams) -> int:
    if params.level is not None:
        return params.level
    level, n = 0, length
    while n > params.target_len:
        n = pywt.dwt_coeff_len(n, len(D4_LOWPASS), params.mode)
        level += 1
    return level


def dwt_approximation(x: np.ndarray, level: int, params: DwtParams = DwtParams()) -> np.ndarray:
    """Approximation coefficients after ``level`` analysis steps along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    if level < 0:
        raise DomainError(f"level must be nonnegative, got {level}")
    minimum = 2**level
    if x.shape[-1] < minimum:
        raise DomainError(f"length {x.shape[-1]} is too short for level {level}; need at least {minimum} samples")
    for _ in range(level):
        x, _detail = pywt.dwt(x, params.wavelet, mode=params.mode, axis=-1)
    return x


def dwt_compress(waveform: Union[LosWaveform, np.ndarray], level: Optional[int] = None, params: DwtParams = DwtParams()) -> ShapeFeature:
    data = waveform.waveforms if isinstance(waveform, LosWaveform) else np.asarray(waveform, dtype=np.float64)
    length = int(data.shape[-1])
    if level is None:
        level = resolve_level(length, params)
    return ShapeFeature(dwt_approximation(data, level, params), level, length, params)


class FeatureExtractor:
    """Compresses every segment at one level, resolved from the longest segment allowed."""

    def __init__(self, params: DwtParams = DwtParams(), max_length: int = 4000):
        if max_length < 1:
            raise DomainError(f"max_length must be positive, got {max_length}")
        self.params = params
        self.max_length = max_length
        self.level = resolve_level(max_length, params)

    def extract(self, components: ComponentSet, segment: Segment) -> ShapeFeature:
        return dwt_compress(extract_los_waveform(components, segment), self.level, self.params)

    def extract_all(self, components: ComponentSet, segments: Sequence[Segment]) -> List[ShapeFeature]:
        return [self.extract(components, s) for s in segments]


FEATURE_COLUMNS = ["subject", "pair", "component", "level", "coeff_index", "value", "sample", "direction", "length"]


def features_frame(features: Sequence[LabeledFeature]) -> pd.DataFrame:
    frames = []
    for item in features:
        coeffs = item.feature.coefficients
        pair, comp, idx = np.meshgrid(*(np.arange(n) for n in coeffs.shape), indexing="ij")
        frames.append(
            pd.DataFrame(
                {
                    "subject": item.subject,
                    "pair": pair.ravel(),
                    "component": comp.ravel(),
                    "level": item.feature.level,
                    "coeff_index": idx.ravel(),
                    "value": coeffs.ravel(),
                    "sample": item.sample,
                    "direction": item.direction,
                    "length": item.feature.original_length,
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=FEATURE_COLUMNS)
    return pd.concat(frames, ignore_index=True)[FEATURE_COLUMNS]


def sidecar_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".json")


def write_features(
    features: Sequence[LabeledFeature],
    path: Union[str, Path],
    params: DwtParams,
    p: int,
    n_pairs: int,
    config_hash: Optional[str] = None,
    level: Optional[int] = None,
) -> FeatureSetMeta:
    if level is None and features:
        level = features[0].feature.level
    for item in features:
        f = item.feature
        if f.p != p or f.n_pairs != n_pairs or f.params != params or f.level != level:
            raise DomainError(f"feature {item.sample} does not match the set's p/pairs/DWT parameters or level")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    features_frame(features).to_csv(path, index=False, lineterminator="\n")
    meta = FeatureSetMeta(
        p=p,
        n_pairs=n_pairs,
        dwt=params.to_model(),
        level=level,
        config_hash=config_hash,
        n_features=len(features),
        subjects=sorted({f.subject for f in features}),
    )
    sidecar_path(path).write_text(meta.model_dump_json(indent=2) + "\n")
    return meta


def read_features(path: Union[str, Path]) -> Tuple[List[LabeledFeature], FeatureSetMeta]:
    path = Path(path)
    meta = FeatureSetMeta.model_validate(json.loads(sidecar_path(path).read_text()))
    params = DwtParams(meta.dwt.wavelet, meta.dwt.mode, meta.dwt.level, meta.dwt.target_len)
    df = pd.read_csv(path, dtype={"subject": str, "sample": str, "direction": str}, float_precision="round_trip")
    features: List[LabeledFeature] = []
    for sample, group in df.groupby("sample", sort=False):
        n_coeffs = int(group["coeff_index"].max()) + 1
        coeffs = np.zeros((meta.n_pairs, meta.p, n_coeffs))
        coeffs[group["pair"].to_numpy(), group["component"].to_numpy(), group["coeff_index"].to_numpy()] = group[
            "value"
        ].to_numpy()
        first = group.iloc[0]
        feature = ShapeFeature(coeffs, int(first["level"]), int(first["length"]), params)
        if meta.level is not None and feature.level != meta.level:
            raise DomainError(f"{path}: sample {sample} has level {feature.level}, the set declares {meta.level}")
        features.append(LabeledFeature(str(sample), str(first["subject"]), feature, str(first["direction"])))
    return features, meta
