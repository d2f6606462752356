import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.decomposition import PCA

from .errors import DomainError
from .trace import CsiTrace

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ComponentSet:
    """Per-pair principal-component waveforms.

    ``waveforms`` is pairs x p x N. ``bases[pair][:, i]`` is the subcarrier
    direction that produced ``waveforms[pair, i]``; ``permutation[pair, i]`` is
    its index in PCA (variance) order, and ``explained_variance`` stays in that
    PCA order.
    """

    waveforms: np.ndarray = field(repr=False)
    explained_variance: np.ndarray = field(repr=False)
    bases: np.ndarray = field(repr=False)
    ordering: str = "pca"
    permutation: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        waveforms = np.asarray(self.waveforms, dtype=np.float64)
        if waveforms.ndim != 3:
            raise DomainError(f"waveforms must be pairs x p x N, got shape {waveforms.shape}")
        pairs, p, _ = waveforms.shape
        permutation = self.permutation
        if permutation is None:
            permutation = np.tile(np.arange(p), (pairs, 1))
        for name, value in (
            ("waveforms", waveforms),
            ("explained_variance", np.asarray(self.explained_variance, dtype=np.float64)),
            ("bases", np.asarray(self.bases, dtype=np.float64)),
            ("permutation", np.asarray(permutation, dtype=np.int64)),
        ):
            value = value.copy()
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        if self.ordering not in ("pca", "peak_to_peak"):
            raise DomainError(f"unknown ordering {self.ordering!r}")

    @property
    def n_pairs(self) -> int:
        return int(self.waveforms.shape[0])

    @property
    def p(self) -> int:
        return int(self.waveforms.shape[1])

    @property
    def n_samples(self) -> int:
        return int(self.waveforms.shape[2])

    def peak_to_peak(self) -> np.ndarray:
        if self.n_samples == 0:
            return np.zeros(self.waveforms.shape[:2])
        return np.ptp(self.waveforms, axis=2)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ComponentSet):
            return NotImplemented
        return (
            self.ordering == other.ordering
            and np.array_equal(self.waveforms, other.waveforms)
            and np.array_equal(self.bases, other.bases)
            and np.array_equal(self.explained_variance, other.explained_variance)
            and np.array_equal(self.permutation, other.permutation)
        )

    __hash__ = None


def _orient(projected: np.ndarray, basis: np.ndarray) -> None:
    # Make the sample of largest magnitude positive, in place.
    for i in range(projected.shape[1]):
        peak = int(np.argmax(np.abs(projected[:, i])))
        if projected[peak, i] < 0:
            projected[:, i] *= -1.0
            basis[:, i] *= -1.0


def pca_project(trace: CsiTrace, p: int = 4) -> ComponentSet:
    if p < 1:
        raise DomainError(f"component count must be at least 1, got {p}")
    if p > trace.n_subcarriers:
        raise DomainError(f"cannot take {p} components from {trace.n_subcarriers} subcarriers")
    if trace.n_frames < 2:
        raise DomainError(f"PCA needs at least 2 frames, got {trace.n_frames}")
    if trace.n_frames < p:
        raise DomainError(f"PCA with p={p} needs at least {p} frames, got {trace.n_frames}")

    waveforms = np.empty((trace.n_pairs, p, trace.n_frames))
    variances = np.empty((trace.n_pairs, p))
    bases = np.empty((trace.n_pairs, trace.n_subcarriers, p))
    for pair in range(trace.n_pairs):
        x = trace.pair_matrix(pair).astype(np.float64)
        pca = PCA(n_components=p, svd_solver="full")
        projected = pca.fit_transform(x)
        basis = pca.components_.T.copy()
        _orient(projected, basis)
        waveforms[pair] = projected.T
        variances[pair] = pca.explained_variance_
        bases[pair] = basis
    logger.debug("projected %d pairs onto %d components", trace.n_pairs, p)
    return ComponentSet(waveforms, variances, bases, ordering="pca")


def reorder_by_peak_to_peak(components: ComponentSet) -> ComponentSet:
    order = np.argsort(-components.peak_to_peak(), axis=1, kind="stable")
    rows = np.arange(components.n_pairs)[:, None]
    return ComponentSet(
        waveforms=components.waveforms[rows, order],
        explained_variance=components.explained_variance,
        bases=np.take_along_axis(components.bases, order[:, None, :], axis=2),
        ordering="peak_to_peak",
        permutation=np.take_along_axis(components.permutation, order, axis=1),
    )
