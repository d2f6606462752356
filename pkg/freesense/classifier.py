import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from numba import jit

from .errors import DomainError
from .features import DwtParams, LabeledFeature, ShapeFeature, read_features, write_features

logger = logging.getLogger(__name__)


@jit(nopython=True)
def _dtw_kernel(x, y, band):
    n = len(x)
    m = len(y)
    if band > 0:
        band = max(band, abs(n - m))
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        lo = 1
        hi = m
        if band > 0:
            lo = max(1, i - band)
            hi = min(m, i + band)
        for j in range(lo, hi + 1):
            cost = abs(x[i - 1] - y[j - 1])
            D[i, j] = cost + min(D[i - 1, j], D[i, j - 1], D[i - 1, j - 1])
    return D[n, m]


@jit(nopython=True)
def _ensemble_kernel(a, b, band):
    total = 0.0
    for pair in range(a.shape[0]):
        for comp in range(a.shape[1]):
            total += _dtw_kernel(a[pair, comp], b[pair, comp], band)
    return total


def dtw_distance(x, y, band: int = 0) -> float:
    """DTW with |x_i - y_j| local cost; ``band`` > 0 adds a Sakoe-Chiba constraint."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise DomainError("DTW inputs must be 1-D sequences")
    if x.size == 0 or y.size == 0:
        raise DomainError("DTW inputs must be nonempty")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("DTW inputs must be finite")
    if band < 0:
        raise DomainError(f"band must be nonnegative, got {band}")
    return float(_dtw_kernel(x, y, int(band)))


def _check_compatible(a: ShapeFeature, b: ShapeFeature) -> None:
    if a.p != b.p:
        raise DomainError(f"component count mismatch: {a.p} vs {b.p}")
    if a.n_pairs != b.n_pairs:
        raise DomainError(f"antenna pair count mismatch: {a.n_pairs} vs {b.n_pairs}")
    if a.params != b.params:
        raise DomainError(f"DWT parameter mismatch: {a.params} vs {b.params}")
    if a.level != b.level:
        raise DomainError(f"DWT level mismatch: {a.level} vs {b.level}")


def ensemble_distance(a: ShapeFeature, b: ShapeFeature, band: int = 0) -> float:
    """Sum of DTW distances over every pair and component."""
    _check_compatible(a, b)
    if band < 0:
        raise DomainError(f"band must be nonnegative, got {band}")
    return float(_ensemble_kernel(a.coefficients, b.coefficients, int(band)))


@dataclass(frozen=True)
class Gallery:
    entries: Tuple[LabeledFeature, ...]
    p: int
    n_pairs: int
    params: DwtParams
    level: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for entry in self.entries:
            f = entry.feature
            if f.p != self.p or f.n_pairs != self.n_pairs or f.params != self.params or f.level != self.level:
                raise DomainError(f"gallery entry {entry.sample} does not share the gallery's p/pairs/DWT parameters or level")

    @classmethod
    def from_features(cls, features: Sequence[LabeledFeature]) -> "Gallery":
        if not features:
            raise DomainError("cannot build a gallery from zero features")
        first = features[0].feature
        return cls(tuple(features), first.p, first.n_pairs, first.params, first.level)

    @property
    def subjects(self) -> List[str]:
        return sorted({e.subject for e in self.entries})

    def __len__(self) -> int:
        return len(self.entries)

    def save(self, path: Union[str, Path], config_hash: Optional[str] = None) -> Path:
        write_features(self.entries, path, self.params, self.p, self.n_pairs, config_hash=config_hash, level=self.level)
        return Path(path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Gallery":
        features, meta = read_features(path)
        if not features:
            raise DomainError(f"{path} holds no gallery samples")
        params = DwtParams(meta.dwt.wavelet, meta.dwt.mode, meta.dwt.level, meta.dwt.target_len)
        level = meta.level if meta.level is not None else features[0].feature.level
        return cls(tuple(features), meta.p, meta.n_pairs, params, level)


@dataclass(frozen=True)
class IdentificationResult:
    predicted: str
    neighbors: Tuple[Tuple[str, float], ...]


def _rank(distances: Sequence[float], entries: Sequence[LabeledFeature]) -> List[int]:
    # Order-free ranking so the result does not depend on gallery order.
    return sorted(
        range(len(entries)),
        key=lambda i: (distances[i], entries[i].subject, entries[i].sample, entries[i].feature.coefficients.tobytes()),
    )


def vote(neighbors: Sequence[Tuple[str, float]]) -> str:
    """Majority label; ties go to the smallest summed distance, then the smallest subject id."""
    counts: Dict[str, int] = defaultdict(int)
    sums: Dict[str, float] = defaultdict(float)
    for subject, distance in neighbors:
        counts[subject] += 1
        sums[subject] += distance
    best = max(counts.values())
    tied = [s for s, c in counts.items() if c == best]
    return min(tied, key=lambda s: (sums[s], s))


def classify_distances(distances: Sequence[float], entries: Sequence[LabeledFeature], k: int) -> IdentificationResult:
    if not entries:
        raise DomainError("gallery is empty")
    if not 1 <= k <= len(entries):
        raise DomainError(f"k={k} must lie in [1, {len(entries)}]")
    order = _rank(distances, entries)[:k]
    neighbors = tuple((entries[i].subject, float(distances[i])) for i in order)
    return IdentificationResult(vote(neighbors), neighbors)


def knn_classify(query: ShapeFeature, gallery: Gallery, k: int = 3, band: int = 0) -> IdentificationResult:
    if len(gallery) == 0:
        raise DomainError("gallery is empty")
    if not 1 <= k <= len(gallery):
        raise DomainError(f"k={k} must lie in [1, {len(gallery)}]")
    distances = [ensemble_distance(query, e.feature, band) for e in gallery.entries]
    return classify_distances(distances, gallery.entries, k)


def _distance_row(query: ShapeFeature, references: Sequence[ShapeFeature], band: int) -> np.ndarray:
    return np.array([ensemble_distance(query, r, band) for r in references])


def distance_matrix(
    queries: Sequence[ShapeFeature], references: Sequence[ShapeFeature], band: int = 0, n_jobs: int = 1
) -> np.ndarray:
    if not queries or not references:
        return np.zeros((len(queries), len(references)))
    rows = Parallel(n_jobs=n_jobs)(delayed(_distance_row)(q, references, band) for q in queries)
    return np.vstack(rows)


def _upper_row(features: Sequence[ShapeFeature], i: int, band: int) -> np.ndarray:
    return np.array([ensemble_distance(features[i], features[j], band) for j in range(i + 1, len(features))])


def pairwise_distances(features: Sequence[ShapeFeature], band: int = 0, n_jobs: int = 1) -> np.ndarray:
    """Symmetric all-pairs ensemble distance matrix."""
    n = len(features)
    out = np.zeros((n, n))
    rows = Parallel(n_jobs=n_jobs)(delayed(_upper_row)(features, i, band) for i in range(n))
    for i, row in enumerate(rows):
        out[i, i + 1 :] = row
        out[i + 1 :, i] = row
    logger.debug("computed %d x %d distance matrix", n, n)
    return out
