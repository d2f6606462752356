import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy import signal

from .errors import DomainError
from .trace import CsiTrace

logger = logging.getLogger(__name__)

INITIAL_STATES = ("zero", "steady")


def cutoff_from_hz(f_hz: float, fs_hz: float) -> float:
    """Normalised cutoff in rad/sample: 2*pi*f/fs."""
    if not fs_hz > 0:
        raise DomainError(f"sample rate must be positive, got {fs_hz}")
    if not 0 < f_hz < fs_hz / 2:
        raise DomainError(f"cutoff {f_hz} Hz must lie in (0, {fs_hz / 2}) for fs={fs_hz} Hz")
    return 2 * math.pi * f_hz / fs_hz


@dataclass(frozen=True)
class FilterSpec:
    cutoff_rad_per_sample: float
    order: int = 4
    zero_phase: bool = False
    initial: str = "zero"

    def __post_init__(self):
        if not 0 < self.cutoff_rad_per_sample < math.pi:
            raise DomainError(f"cutoff must lie in (0, pi) rad/sample, got {self.cutoff_rad_per_sample}")
        if self.order < 1:
            raise DomainError(f"filter order must be at least 1, got {self.order}")
        if self.initial not in INITIAL_STATES:
            raise DomainError(f"initial state must be one of {INITIAL_STATES}, got {self.initial!r}")

    @classmethod
    def from_hz(
        cls, cutoff_hz: float, fs_hz: float, order: int = 4, zero_phase: bool = False, initial: str = "zero"
    ) -> "FilterSpec":
        return cls(cutoff_from_hz(cutoff_hz, fs_hz), order, zero_phase, initial)


@dataclass(frozen=True, eq=False)
class FilterCoefficients:
    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64)
        a = np.asarray(self.a, dtype=np.float64)
        if a.ndim != 1 or b.ndim != 1 or a.size == 0 or b.size == 0:
            raise DomainError("filter coefficients must be nonempty 1-D sequences")
        if a[0] != 1.0:
            raise DomainError(f"a[0] must be 1, got {a[0]}")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "a", a)

    def poles(self) -> np.ndarray:
        return np.roots(self.a)

    def is_stable(self) -> bool:
        return bool(np.all(np.abs(self.poles()) < 1.0))

    def frequency_response(self, w) -> np.ndarray:
        """Complex response at angular frequencies ``w`` (rad/sample)."""
        _, h = signal.freqz(self.b, self.a, worN=np.atleast_1d(np.asarray(w, dtype=np.float64)))
        return h


def design_lowpass(spec: FilterSpec) -> FilterCoefficients:
    # butter() pre-warps and applies the bilinear transform; Wn is relative to Nyquist.
    b, a = signal.butter(spec.order, spec.cutoff_rad_per_sample / math.pi, btype="low", analog=False)
    coeffs = FilterCoefficients(b / a[0], a / a[0])
    if not coeffs.is_stable():
        raise DomainError(f"order {spec.order} design at {spec.cutoff_rad_per_sample} rad/sample is unstable")
    logger.debug("designed order-%d low-pass at %.5f rad/sample", spec.order, spec.cutoff_rad_per_sample)
    return coeffs


def apply_filter(coeffs: FilterCoefficients, series, zero_phase: bool = False, initial: str = "zero") -> np.ndarray:
    """Filter along axis 0.

    Causal by default, starting from zero state. ``initial="steady"`` starts
    from the state a constant input equal to the first sample would have
    reached, so a nonzero baseline does not ring at the start. ``zero_phase``
    runs ``filtfilt`` and ignores ``initial``.
    """
    if initial not in INITIAL_STATES:
        raise DomainError(f"initial state must be one of {INITIAL_STATES}, got {initial!r}")
    x = np.asarray(series, dtype=np.float64)
    if x.ndim not in (1, 2):
        raise DomainError(f"series must be 1-D or 2-D, got {x.ndim}-D")
    if not np.all(np.isfinite(x)):
        raise DomainError("series contains non-finite values")
    if x.shape[0] == 0:
        return x.copy()
    if zero_phase:
        padlen = min(3 * max(len(coeffs.a), len(coeffs.b)), x.shape[0] - 1)
        return signal.filtfilt(coeffs.b, coeffs.a, x, axis=0, padlen=padlen)
    if initial == "zero":
        return signal.lfilter(coeffs.b, coeffs.a, x, axis=0)
    zi = signal.lfilter_zi(coeffs.b, coeffs.a)
    zi = zi.reshape((-1,) + (1,) * (x.ndim - 1)) * x[:1]
    y, _ = signal.lfilter(coeffs.b, coeffs.a, x, axis=0, zi=zi)
    return y


def filter_trace(trace: CsiTrace, spec: FilterSpec, coeffs: Optional[FilterCoefficients] = None) -> CsiTrace:
    coeffs = coeffs or design_lowpass(spec)
    streams = apply_filter(coeffs, trace.streams(), zero_phase=spec.zero_phase, initial=spec.initial)
    np.clip(streams, 0.0, None, out=streams)
    return trace.with_frames(streams.reshape(trace.frames.shape).astype(np.float32))


class TracePreprocessor:
    """Low-pass denoising with designs cached per sample rate."""

    def __init__(self, cutoff_hz: float = 10.0, order: int = 4, zero_phase: bool = False, initial: str = "zero"):
        self.cutoff_hz = cutoff_hz
        self.order = order
        self.zero_phase = zero_phase
        self.initial = initial
        self._designs: Dict[float, FilterCoefficients] = {}

    @classmethod
    def from_config(cls, section) -> "TracePreprocessor":
        return cls(
            cutoff_hz=section.cutoff_hz, order=section.order, zero_phase=section.zero_phase, initial=section.initial
        )

    def spec_for(self, fs_hz: float) -> FilterSpec:
        return FilterSpec.from_hz(self.cutoff_hz, fs_hz, self.order, self.zero_phase, self.initial)

    def coefficients(self, fs_hz: float) -> FilterCoefficients:
        if fs_hz not in self._designs:
            self._designs[fs_hz] = design_lowpass(self.spec_for(fs_hz))
        return self._designs[fs_hz]

    def process(self, trace: CsiTrace) -> CsiTrace:
        return filter_trace(trace, self.spec_for(trace.sample_rate_hz), self.coefficients(trace.sample_rate_hz))
