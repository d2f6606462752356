import numpy as np
import pytest

from freesense.errors import DomainError
from freesense.synth import (
    Crossing,
    SubjectProfile,
    SynthSpec,
    burst_envelope,
    corpus_specs,
    load_corpus,
    load_corpus_item,
    subject_names,
    synth_corpus,
    synth_profiles,
    synth_subject_profile,
    synth_trace,
)
from freesense.trace import write_trace


def _fields(profile):
    data = profile.to_model().model_dump()
    data.pop("subject")
    return data


def test_profile_is_deterministic():
    assert synth_subject_profile(7, "alice", 0.7) == synth_subject_profile(7, "alice", 0.7)
    assert synth_subject_profile(7, "alice", 0.7) != synth_subject_profile(8, "alice", 0.7)


def test_zero_separation_makes_subjects_identical():
    a, b, c = (synth_subject_profile(3, s, 0.0) for s in ("S01", "S02", "S03"))
    assert _fields(a) == _fields(b) == _fields(c)


def test_full_separation_bands_disjoint():
    a = synth_subject_profile(42, "S01", 1.0)
    b = synth_subject_profile(42, "S02", 1.0)
    assert a.band_high_hz < b.band_low_hz or b.band_high_hz < a.band_low_hz
    for p in (a, b):
        assert 4.5 <= p.band_low_hz <= p.band_high_hz < 10.0


def test_profile_rejects_separation():
    with pytest.raises(DomainError):
        synth_subject_profile(0, "S01", 1.5)


def test_profile_model_round_trip():
    profile = synth_subject_profile(5, "S04", 0.4)
    assert SubjectProfile.from_model(profile.to_model()) == profile


def test_subject_names():
    assert subject_names(3) == ["S01", "S02", "S03"]


def test_empty_schedule_is_constant():
    spec = SynthSpec(duration_s=2.0, n_tx=1, n_rx=2, n_subcarriers=5, noise_sigma=0.0, drift_amplitude=0.0)
    trace, labels = synth_trace([], spec)
    assert labels == []
    assert trace.n_frames == 2000
    assert np.all(trace.frames == trace.frames[0])


def test_single_crossing_label():
    profile = synth_subject_profile(1, "S01", 0.5, n_pairs=2, n_subcarriers=4)
    spec = SynthSpec(
        duration_s=8.0,
        n_tx=1,
        n_rx=2,
        n_subcarriers=4,
        crossings=(Crossing(5.0, "S01", duration_samples=1000),),
    )
    trace, labels = synth_trace([profile], spec)
    assert len(labels) == 1
    label = labels[0]
    assert label.subject == "S01" and label.direction == "ltr"
    assert abs(label.segment.j_begin - 5000) <= 100
    assert abs(label.segment.j_end - 6000) <= 100
    label.segment.validate(trace.n_frames)


def test_labeled_interval_dominates_baseline_variance():
    profile = synth_subject_profile(2, "S01", 0.7)
    spec = SynthSpec(duration_s=6.0, crossings=(Crossing(2.0, "S01"),), seed=9)
    trace, labels = synth_trace([profile], spec)
    seg = labels[0].segment
    streams = trace.streams().astype(np.float64)
    inside = streams[seg.j_begin : seg.j_end].var(axis=0)
    outside = streams[: seg.j_begin - 300].var(axis=0)
    assert np.median(inside / outside) >= 4.0


def test_fixed_seed_is_byte_identical():
    profiles = [synth_subject_profile(0, s, 0.7) for s in ("S01", "S02")]
    spec = SynthSpec(duration_s=12.0, crossings=(Crossing(1.0, "S01"), Crossing(6.5, "S02", "rtl")), seed=11)
    first, first_labels = synth_trace(profiles, spec)
    second, second_labels = synth_trace(profiles, spec)
    assert write_trace(first) == write_trace(second)
    assert first_labels == second_labels


@pytest.mark.parametrize(
    "crossings",
    [
        (Crossing(1.0, "S09"),),
        (Crossing(1.0, "S01"), Crossing(3.0, "S01")),
        (Crossing(0.01, "S01"),),
        (Crossing(5.9, "S01"),),
    ],
)
def test_schedule_errors(crossings):
    profile = synth_subject_profile(0, "S01", 0.5)
    with pytest.raises(DomainError):
        synth_trace([profile], SynthSpec(duration_s=6.0, crossings=crossings))


def test_rtl_envelope_is_mirrored():
    profile = synth_subject_profile(4, "S01", 1.0)
    assert profile.skew != 0.0
    offset, env = burst_envelope(profile, 1200, "ltr")
    _, env_rtl = burst_envelope(profile, 1200, "rtl")
    assert offset == -profile.pad < 0
    assert np.array_equal(env_rtl, env[::-1])
    assert not np.allclose(env, env[::-1])
    assert env.max() == pytest.approx(1.0)
    with pytest.raises(DomainError):
        burst_envelope(profile, 1200, "up")


def test_corpus_specs_round_robin(small_synth):
    profiles = synth_profiles(small_synth)
    specs = corpus_specs(small_synth, profiles)
    assert len(specs) == 6
    assert [s.crossings[0].subject for s in specs] == ["S01", "S02"] * 3
    assert len({s.seed for s in specs}) == 6


def test_corpus_margins_follow_duration(small_synth):
    fs = small_synth.sample_rate_hz
    profiles = {p.subject: p for p in synth_profiles(small_synth)}
    for spec in corpus_specs(small_synth, list(profiles.values())):
        crossing = spec.crossings[0]
        n = int(round(spec.duration_s * fs))
        lead = int(round(crossing.onset_s * fs))
        assert lead == round(small_synth.lead_s * fs + small_synth.quiet_ratio * crossing.duration_samples)
        assert lead > profiles[crossing.subject].pad
        assert n - lead - crossing.duration_samples == lead


def test_corpus_on_disk(tmp_path, small_synth):
    manifest = synth_corpus(tmp_path / "a", small_synth, n_jobs=1)
    synth_corpus(tmp_path / "b", small_synth, n_jobs=1)
    assert len(manifest.traces) == 6
    assert [p.subject for p in manifest.profiles] == ["S01", "S02"]

    loaded, items = load_corpus(tmp_path / "a")
    assert loaded == manifest
    for trace_path, labels_path in items:
        trace, labels = load_corpus_item(trace_path, labels_path)
        assert trace.n_pairs == 2
        assert len(labels) == 1
        labels[0].segment.validate(trace.n_frames)
        twin = tmp_path / "b" / trace_path.relative_to(tmp_path / "a")
        assert twin.read_bytes() == trace_path.read_bytes()


def test_load_corpus_requires_manifest(tmp_path):
    with pytest.raises(DomainError):
        load_corpus(tmp_path)
