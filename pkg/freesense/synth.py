"""Seeded synthetic CSI traces with per-subject crossing signatures.

Each crossing is a rank-1 burst across all streams: a shadowing dip with an
oscillation riding on it, both under one smooth box envelope. Identity lives
in the duration, edge shape, oscillation band, dip depth and the per-stream
coupling weights; trace-level randomness never depends on the subject, so a
zero-separation corpus carries no identity signal.
"""

import logging
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.special import ndtr
from tqdm import tqdm

from .config import SynthSection, settings
from .errors import DomainError
from .schemas import CorpusManifest, CrossingModel, SubjectProfileModel, TraceEntry
from .trace import CsiTrace, Segment, SegmentLabel, read_labels, save_trace, write_labels, load_trace

logger = logging.getLogger(__name__)

BAND_LOW_HZ = 4.5
BAND_HIGH_HZ = 8.0
LABEL_FRACTION = 0.05
OSC_AMPLITUDE = 0.4


@dataclass(frozen=True, eq=False)
class SubjectProfile:
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
    coupling: np.ndarray = field(repr=False)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubjectProfile):
            return NotImplemented
        return self.to_model() == other.to_model()

    __hash__ = None

    @property
    def edge_widths(self) -> Tuple[float, float]:
        """Leading and trailing edge widths in samples."""
        return self.edge_width * (1.0 + self.skew), self.edge_width * (1.0 - self.skew)

    @property
    def pad(self) -> int:
        return int(math.ceil(5 * max(self.edge_widths)))

    def draw_duration(self, rng: np.random.Generator) -> int:
        return int(round(max(rng.normal(self.duration_mean, self.duration_sigma), 4 * self.edge_width)))

    def to_model(self) -> SubjectProfileModel:
        return SubjectProfileModel(
            subject=self.subject,
            duration_mean=self.duration_mean,
            duration_sigma=self.duration_sigma,
            edge_width=self.edge_width,
            skew=self.skew,
            band_low_hz=self.band_low_hz,
            band_high_hz=self.band_high_hz,
            harmonic_weight=self.harmonic_weight,
            shadow_depth=self.shadow_depth,
            phase=self.phase,
            coupling=self.coupling.tolist(),
        )

    @classmethod
    def from_model(cls, model: SubjectProfileModel) -> "SubjectProfile":
        data = model.model_dump()
        data["coupling"] = np.asarray(data["coupling"], dtype=np.float64)
        return cls(**data)


@dataclass(frozen=True)
class Crossing:
    onset_s: float
    subject: str
    direction: str = "ltr"
    duration_samples: Optional[int] = None


@dataclass(frozen=True)
class SynthSpec:
    duration_s: float
    sample_rate_hz: float = 1000.0
    n_tx: int = 2
    n_rx: int = 3
    n_subcarriers: int = 30
    crossings: Tuple[Crossing, ...] = ()
    noise_sigma: float = 0.05
    drift_amplitude: float = 0.02
    drift_period_s: float = 20.0
    seed: int = 0
    environment_seed: int = 0
    min_spacing_samples: int = 4000


def _subject_key(subject: str) -> int:
    return zlib.crc32(subject.encode("utf-8"))


def _base_coupling(seed: int, n_pairs: int, n_subcarriers: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 0])
    return rng.uniform(0.5, 1.5, size=(n_pairs, n_subcarriers))


def synth_subject_profile(
    seed: int, subject: str, separation: float, n_pairs: int = 6, n_subcarriers: int = 30
) -> SubjectProfile:
    if not 0.0 <= separation <= 1.0:
        raise DomainError(f"separation must lie in [0, 1], got {separation}")
    rng = np.random.default_rng([seed, 1, _subject_key(subject)])
    u = rng.uniform(-1.0, 1.0, size=7)
    pair_gain = rng.uniform(-1.0, 1.0, size=(n_pairs, 1))
    stream_gain = rng.uniform(-1.0, 1.0, size=(n_pairs, n_subcarriers))

    center = 6.5 + separation * 1.5 * u[0]
    half_width = (1.0 - separation) * 0.3
    coupling = _base_coupling(seed, n_pairs, n_subcarriers) * (1.0 + separation * (0.5 * pair_gain + 0.15 * stream_gain))
    return SubjectProfile(
        subject=subject,
        duration_mean=1250.0 + 350.0 * separation * u[1],
        duration_sigma=40.0,
        edge_width=22.0 + 4.0 * separation * u[2],
        skew=0.3 * separation * u[3],
        band_low_hz=max(BAND_LOW_HZ, center - half_width),
        band_high_hz=min(BAND_HIGH_HZ, center + half_width),
        harmonic_weight=0.15 + 0.1 * separation * u[4],
        shadow_depth=1.0 + 0.1 * separation * u[5],
        phase=math.pi * separation * u[6],
        coupling=coupling,
    )


def subject_names(n: int) -> List[str]:
    return [f"S{i + 1:02d}" for i in range(n)]


def burst_envelope(profile: SubjectProfile, duration: int, direction: str = "ltr") -> Tuple[int, np.ndarray]:
    """Returns (offset of the first sample relative to onset, unit-peak envelope)."""
    lead, trail = profile.edge_widths
    pad = profile.pad
    u = np.arange(-pad, duration + pad, dtype=np.float64)
    env = ndtr(u / lead) * ndtr((duration - u) / trail)
    env /= env.max()
    if direction == "rtl":
        env = env[::-1].copy()
    elif direction != "ltr":
        raise DomainError(f"unknown direction {direction!r}")
    return -pad, env


def _burst(profile: SubjectProfile, duration: int, direction: str, fs: float, rng: np.random.Generator):
    offset, env = burst_envelope(profile, duration, direction)
    f0 = rng.uniform(profile.band_low_hz, profile.band_high_hz)
    phase = profile.phase + rng.normal(0.0, 0.1)
    t = (offset + np.arange(env.size)) / fs
    h = profile.harmonic_weight
    osc = (1.0 - h) * np.sin(2 * np.pi * f0 * t + phase) + h * np.sin(4 * np.pi * f0 * t + 2 * phase)
    if direction == "rtl":
        osc = osc[::-1]
    signal = env * (OSC_AMPLITUDE * osc - profile.shadow_depth)
    return offset, env, signal


def synth_trace(profiles: Sequence[SubjectProfile], spec: SynthSpec) -> Tuple[CsiTrace, List[SegmentLabel]]:
    by_subject: Dict[str, SubjectProfile] = {p.subject: p for p in profiles}
    fs = spec.sample_rate_hz
    n = int(round(spec.duration_s * fs))
    n_pairs = spec.n_tx * spec.n_rx
    crossings = sorted(spec.crossings, key=lambda c: c.onset_s)
    for c in crossings:
        if c.subject not in by_subject:
            raise DomainError(f"crossing references unknown subject {c.subject!r}")
    for a, b in zip(crossings, crossings[1:]):
        if (b.onset_s - a.onset_s) * fs < spec.min_spacing_samples:
            raise DomainError(f"crossings at {a.onset_s}s and {b.onset_s}s are closer than {spec.min_spacing_samples} samples")

    env_rng = np.random.default_rng([spec.environment_seed, 2])
    baseline = env_rng.uniform(8.0, 20.0, size=(n_pairs, spec.n_subcarriers))
    rng = np.random.default_rng([spec.seed, 3])
    drift_phase = rng.uniform(0.0, 2 * np.pi, size=(n_pairs, spec.n_subcarriers))

    frames = np.broadcast_to(baseline, (n, n_pairs, spec.n_subcarriers)).astype(np.float64)
    labels: List[SegmentLabel] = []
    for c in crossings:
        profile = by_subject[c.subject]
        if profile.coupling.shape != (n_pairs, spec.n_subcarriers):
            raise DomainError(f"profile {profile.subject} coupling shape {profile.coupling.shape} does not fit the trace")
        duration = c.duration_samples if c.duration_samples is not None else profile.draw_duration(rng)
        onset = int(round(c.onset_s * fs))
        offset, env, burst = _burst(profile, duration, c.direction, fs, rng)
        start = onset + offset
        if start < 0 or start + burst.size > n:
            raise DomainError(f"crossing at {c.onset_s}s does not fit inside a {spec.duration_s}s trace")
        frames[start : start + burst.size] += burst[:, None, None] * profile.coupling[None]
        support = np.flatnonzero(env >= LABEL_FRACTION)
        labels.append(SegmentLabel(Segment(start + support[0], start + support[-1]), c.subject, c.direction))

    t = np.arange(n) / fs
    if spec.drift_amplitude > 0:
        frames += spec.drift_amplitude * np.sin(2 * np.pi * t[:, None, None] / spec.drift_period_s + drift_phase[None])
    if spec.noise_sigma > 0:
        frames += rng.normal(0.0, spec.noise_sigma, size=frames.shape)
    np.clip(frames, 0.0, None, out=frames)
    trace = CsiTrace(fs, spec.n_tx, spec.n_rx, spec.n_subcarriers, frames.astype(np.float32))
    return trace, labels


def synth_profiles(section: SynthSection) -> List[SubjectProfile]:
    n_pairs = section.n_tx * section.n_rx
    return [
        synth_subject_profile(section.seed, s, section.separation, n_pairs, section.n_subcarriers)
        for s in subject_names(section.subjects)
    ]


def trace_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, 4, index]).generate_state(1)[0])


def corpus_specs(section: SynthSection, profiles: Sequence[SubjectProfile], min_spacing: int = 4000) -> List[SynthSpec]:
    """One single-crossing spec per trace, subjects assigned round-robin.

    The quiet lead and tail grow with the drawn crossing length
    (`quiet_ratio` samples per crossing sample on each side), so the active
    share of every trace stays about the same whatever the duration.
    """
    n_traces = section.n_traces or section.subjects * section.samples_per_subject
    fs = section.sample_rate_hz
    specs = []
    for index in range(n_traces):
        profile = profiles[index % len(profiles)]
        seed = trace_seed(section.seed, index)
        rng = np.random.default_rng([seed, 5])
        duration = profile.draw_duration(rng)
        direction = "rtl" if rng.uniform() < section.rtl_fraction else "ltr"
        lead = int(round(section.lead_s * fs + section.quiet_ratio * duration))
        tail = int(round(section.tail_s * fs + section.quiet_ratio * duration))
        crossing = Crossing(onset_s=lead / fs, subject=profile.subject, direction=direction, duration_samples=duration)
        specs.append(
            SynthSpec(
                duration_s=(lead + duration + tail) / fs,
                sample_rate_hz=fs,
                n_tx=section.n_tx,
                n_rx=section.n_rx,
                n_subcarriers=section.n_subcarriers,
                crossings=(crossing,),
                noise_sigma=section.noise_sigma,
                drift_amplitude=section.drift_amplitude,
                drift_period_s=section.drift_period_s,
                seed=seed,
                environment_seed=section.seed,
                min_spacing_samples=min_spacing,
            )
        )
    return specs


def _write_one(profiles, spec: SynthSpec, out_dir: Path, name: str) -> TraceEntry:
    trace, labels = synth_trace(profiles, spec)
    save_trace(trace, out_dir / "traces" / f"{name}.csit")
    write_labels(labels, out_dir / "labels" / f"{name}.csv")
    return TraceEntry(
        trace=f"traces/{name}.csit",
        labels=f"labels/{name}.csv",
        seed=spec.seed,
        crossings=[CrossingModel(onset_s=c.onset_s, subject=c.subject, direction=c.direction) for c in spec.crossings],
    )


def synth_corpus(out_dir: Union[str, Path], section: SynthSection, min_spacing: int = 4000, n_jobs: Optional[int] = None) -> CorpusManifest:
    out_dir = Path(out_dir)
    profiles = synth_profiles(section)
    specs = corpus_specs(section, profiles, min_spacing)
    jobs = (delayed(_write_one)(profiles, spec, out_dir, f"trace_{i:04d}") for i, spec in enumerate(specs))
    entries = Parallel(n_jobs=n_jobs or settings.N_JOBS)(
        tqdm(jobs, total=len(specs), desc="synth", disable=not settings.SHOW_PROGRESS)
    )
    manifest = CorpusManifest(
        seed=section.seed,
        separation=section.separation,
        sample_rate_hz=section.sample_rate_hz,
        n_tx=section.n_tx,
        n_rx=section.n_rx,
        n_subcarriers=section.n_subcarriers,
        noise_sigma=section.noise_sigma,
        drift_amplitude=section.drift_amplitude,
        drift_period_s=section.drift_period_s,
        profiles=[p.to_model() for p in profiles],
        traces=list(entries),
    )
    (out_dir / "manifest.json").write_text(manifest.model_dump_json(indent=2) + "\n")
    logger.info("wrote %d traces for %d subjects to %s", len(specs), len(profiles), out_dir)
    return manifest


def load_corpus(corpus_dir: Union[str, Path]) -> Tuple[CorpusManifest, List[Tuple[Path, Path]]]:
    corpus_dir = Path(corpus_dir)
    manifest_path = corpus_dir / "manifest.json"
    if not manifest_path.exists():
        raise DomainError(f"{corpus_dir} has no manifest.json")
    manifest = CorpusManifest.model_validate_json(manifest_path.read_text())
    return manifest, [(corpus_dir / e.trace, corpus_dir / e.labels) for e in manifest.traces]


def load_corpus_item(trace_path: Path, labels_path: Path) -> Tuple[CsiTrace, List[SegmentLabel]]:
    return load_trace(trace_path), read_labels(labels_path)
