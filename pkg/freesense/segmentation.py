import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError
from .pca import ComponentSet
from .trace import Segment

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmenterParams:
    window: int
    t1: float
    t2: float
    timelen1: int
    timelen2: int

    def __post_init__(self):
        if self.window < 2:
            raise DomainError(f"window must be at least 2, got {self.window}")
        if not self.t1 > self.t2 > 0:
            raise DomainError(f"thresholds must satisfy t1 > t2 > 0, got t1={self.t1}, t2={self.t2}")
        if not 0 < self.timelen1 < self.timelen2:
            raise DomainError(f"durations must satisfy 0 < timelen1 < timelen2, got {self.timelen1}, {self.timelen2}")


@dataclass(frozen=True, eq=False)
class MadProfile:
    before: np.ndarray = field(repr=False)
    after: np.ndarray = field(repr=False)
    window: int

    @property
    def n(self) -> int:
        return int(self.before.shape[0])

    @property
    def valid(self) -> slice:
        return slice(self.window, self.n - self.window + 1)

    def values(self) -> np.ndarray:
        """Pooled valid MAD values of both profiles."""
        return np.concatenate([self.before[self.valid], self.after[self.valid]])

    def activity(self) -> np.ndarray:
        return (self.before + self.after) / 2.0


@dataclass(frozen=True)
class SegmentationScore:
    dr: float
    er: float
    n_correct: int
    n_false: int
    n_truth: int
    n_detected: int


def window_mad(y: np.ndarray, w: int) -> np.ndarray:
    """MAD of every length-``w`` window of ``y`` around that window's mean."""
    windows = sliding_window_view(np.asarray(y, dtype=np.float64), w)
    return np.abs(windows - windows.mean(axis=1, keepdims=True)).mean(axis=1)


def _profile(series: np.ndarray, w: int) -> MadProfile:
    n = series.shape[-1]
    if w < 2:
        raise DomainError(f"window must be at least 2, got {w}")
    if n < 2 * w:
        raise DomainError(f"trace length {n} is shorter than twice the window ({2 * w})")
    total = np.zeros(n - w + 1)
    for y in series:
        total += window_mad(y, w)
    before = np.full(n, np.nan)
    after = np.full(n, np.nan)
    before[w : n - w + 1] = total[: n - 2 * w + 1]
    after[w : n - w + 1] = total[w:]
    return MadProfile(before, after, w)


def mad_profile(components: ComponentSet, w: int) -> MadProfile:
    """Trace-wide profile summed over every component of every pair."""
    return _profile(components.waveforms.reshape(-1, components.n_samples), w)


def mad_profiles_per_pair(components: ComponentSet, w: int) -> List[MadProfile]:
    return [_profile(components.waveforms[pair], w) for pair in range(components.n_pairs)]


def resolve_thresholds(profile: MadProfile, t1_percentile: float, t2_percentile: float) -> Tuple[float, float]:
    values = profile.values()
    return float(np.percentile(values, t1_percentile)), float(np.percentile(values, t2_percentile))


def detect_segments(profile: MadProfile, params: SegmenterParams) -> List[Segment]:
    if profile.window != params.window:
        raise DomainError(f"profile window {profile.window} differs from params window {params.window}")
    before, after = profile.before, profile.after
    with np.errstate(invalid="ignore"):
        starts = np.flatnonzero((before <= params.t2) & (after >= params.t1))
        ends = np.flatnonzero((after <= params.t2) & (before >= params.t1))

    segments: List[Segment] = []
    resume = 0
    for s in starts:
        if s < resume:
            continue
        k = np.searchsorted(ends, s + params.timelen1, side="left")
        if k < len(ends) and ends[k] <= s + params.timelen2:
            e = int(ends[k])
            segments.append(Segment(int(s), e))
            resume = e + 1
    return segments


def detect_segments_baseline(profile: MadProfile, threshold: float) -> List[Segment]:
    """Single-threshold reference segmenter: contiguous runs of mean activity above ``threshold``."""
    with np.errstate(invalid="ignore"):
        above = np.nan_to_num(profile.activity(), nan=-np.inf) > threshold
    edges = np.diff(np.concatenate([[0], above.astype(np.int8), [0]]))
    run_starts = np.flatnonzero(edges == 1)
    run_ends = np.flatnonzero(edges == -1) - 1
    return [Segment(int(b), int(e)) for b, e in zip(run_starts, run_ends) if e > b]


def match_segments(
    detected: Sequence[Segment], truth: Sequence[Segment], match_tol: int
) -> List[Tuple[int, int]]:
    """Greedy one-to-one matching in time order; returns (detected index, truth index) pairs.

    A detection matches a truth segment when both endpoints lie within ``match_tol``.
    Indices refer to the inputs as given.
    """
    if match_tol < 0:
        raise DomainError(f"match tolerance must be nonnegative, got {match_tol}")
    d_order = sorted(range(len(detected)), key=lambda i: detected[i])
    used = set()
    pairs: List[Tuple[int, int]] = []
    for ti in sorted(range(len(truth)), key=lambda i: truth[i]):
        t = truth[ti]
        for di in d_order:
            if di in used:
                continue
            d = detected[di]
            if abs(d.j_begin - t.j_begin) <= match_tol and abs(d.j_end - t.j_end) <= match_tol:
                used.add(di)
                pairs.append((di, ti))
                break
    return pairs


def segmentation_metrics(
    detected: Sequence[Segment], truth: Sequence[Segment], match_tol: int
) -> SegmentationScore:
    n_correct = len(match_segments(detected, truth, match_tol))
    n_truth, n_detected = len(truth), len(detected)
    n_false = n_detected - n_correct
    return SegmentationScore(
        dr=n_correct / n_truth if n_truth else 0.0,
        er=n_false / n_detected if n_detected else 0.0,
        n_correct=n_correct,
        n_false=n_false,
        n_truth=n_truth,
        n_detected=n_detected,
    )


def merge_segments(groups: Sequence[Sequence[Segment]]) -> List[Segment]:
    """Union of several detections; on overlap the earlier segment wins."""
    merged: List[Segment] = []
    for seg in sorted(s for group in groups for s in group):
        if merged and seg.j_begin <= merged[-1].j_end:
            continue
        merged.append(seg)
    return merged


class Segmenter:
    def __init__(
        self,
        window: int = 500,
        timelen1: int = 500,
        timelen2: int = 4000,
        t1: Optional[float] = None,
        t2: Optional[float] = None,
        t1_percentile: float = 90.0,
        t2_percentile: float = 40.0,
        pool_pairs: bool = True,
        baseline: str = "none",
        baseline_percentile: float = 65.0,
    ):
        if baseline not in ("none", "wikey"):
            raise DomainError(f"unknown baseline {baseline!r}")
        self.window = window
        self.timelen1 = timelen1
        self.timelen2 = timelen2
        self.t1 = t1
        self.t2 = t2
        self.t1_percentile = t1_percentile
        self.t2_percentile = t2_percentile
        self.pool_pairs = pool_pairs
        self.baseline = baseline
        self.baseline_percentile = baseline_percentile

    @classmethod
    def from_config(cls, section, baseline: Optional[str] = None) -> "Segmenter":
        return cls(
            window=section.window,
            timelen1=section.timelen1,
            timelen2=section.timelen2,
            t1=section.t1,
            t2=section.t2,
            t1_percentile=section.t1_percentile,
            t2_percentile=section.t2_percentile,
            pool_pairs=section.pool_pairs,
            baseline=baseline or section.baseline,
            baseline_percentile=section.baseline_percentile,
        )

    def params_for(self, profile: MadProfile) -> Optional[SegmenterParams]:
        if self.t1 is not None and self.t2 is not None:
            t1, t2 = self.t1, self.t2
        else:
            t1, t2 = resolve_thresholds(profile, self.t1_percentile, self.t2_percentile)
        if not t1 > t2 > 0:
            logger.debug("degenerate thresholds t1=%g t2=%g, no activity to segment", t1, t2)
            return None
        return SegmenterParams(self.window, t1, t2, self.timelen1, self.timelen2)

    def _detect_one(self, profile: MadProfile) -> List[Segment]:
        if self.baseline == "wikey":
            threshold = float(np.percentile(profile.values(), self.baseline_percentile))
            return detect_segments_baseline(profile, threshold)
        params = self.params_for(profile)
        if params is None:
            return []
        logger.debug("thresholds t1=%.6g t2=%.6g", params.t1, params.t2)
        return detect_segments(profile, params)

    def detect(self, components: ComponentSet) -> List[Segment]:
        if self.pool_pairs:
            return self._detect_one(mad_profile(components, self.window))
        return merge_segments([self._detect_one(p) for p in mad_profiles_per_pair(components, self.window)])
