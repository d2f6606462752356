import numpy as np
import pytest

from freesense.classifier import Gallery
from freesense.config import PipelineConfig, SynthSection
from freesense.errors import DomainError
from freesense.features import write_features
from freesense.inference import IdentificationService
from freesense.pca import ComponentSet
from freesense.pipeline import (
    Pipeline,
    corpus_features,
    count_outcomes,
    features_for_subject,
    label_features,
    process_corpus,
    read_segments,
    segmentation_table,
    segments_frame,
)
from freesense.report import write_csv
from freesense.synth import SynthSpec, corpus_specs, synth_corpus, synth_profiles, synth_trace
from freesense.segmentation import segmentation_metrics
from freesense.trace import Segment, SegmentLabel, label_segments, load_trace
from freesense.train import TrainConfig, build_gallery, load_feature_files, train


@pytest.fixture(scope="module")
def labelled_trace():
    section = SynthSection(subjects=2, samples_per_subject=1, separation=1.0, rtl_fraction=1.0)
    profiles = synth_profiles(section)
    return synth_trace(profiles, corpus_specs(section, profiles)[1])


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    synth_corpus(out, SynthSection(subjects=2, samples_per_subject=3, separation=1.0, n_tx=1, n_rx=2), n_jobs=1)
    return out


def _random_components(rng, pairs=6):
    return ComponentSet(rng.normal(size=(pairs, 4, 900)), np.zeros((pairs, 4)), np.zeros((pairs, 30, 4)))


def test_analyze_finds_the_crossing(labelled_trace, config):
    trace, labels = labelled_trace
    pipeline = Pipeline(config)
    analysis = pipeline.analyze(trace)
    assert analysis.components.ordering == "peak_to_peak"
    assert analysis.components.waveforms.shape == (6, 4, trace.n_frames)
    features = label_features("t", analysis.components, analysis.segments, labels, pipeline.extractor, 500)
    assert len(features) == 1
    assert (features[0].subject, features[0].direction) == ("S02", "rtl")
    assert features[0].sample.startswith("t#")


@pytest.mark.parametrize("index", range(6))
def test_default_segmenter_finds_each_subject(index, config):
    section = SynthSection(n_traces=6)
    profiles = synth_profiles(section)
    trace, labels = synth_trace(profiles, corpus_specs(section, profiles)[index])
    segments = Pipeline(config).analyze(trace).segments
    assert len(segments) == 1
    score = segmentation_metrics(segments, label_segments(labels), config.seg.tolerance)
    assert score.n_correct == 1


def test_prefiltered_input_skips_filter(labelled_trace, config):
    trace, _ = labelled_trace
    pipeline = Pipeline(config)
    filtered = pipeline.filter(trace)
    assert pipeline.analyze(filtered, filtered=True).segments == pipeline.analyze(trace).segments


def test_unmatched_detections_are_dropped(rng, config):
    pipeline = Pipeline(config)
    components = _random_components(rng, pairs=1)
    labels = [SegmentLabel(Segment(100, 800), "A")]
    assert label_features("x", components, [Segment(50, 890)], labels, pipeline.extractor, 40) == []
    named = features_for_subject("x", pipeline, components, [Segment(50, 890)], "B", "rtl")
    assert (named[0].subject, named[0].direction) == ("B", "rtl")


def test_segments_csv_round_trip(tmp_path):
    segments = [Segment(10, 600), Segment(900, 2000)]
    assert read_segments(write_csv(segments_frame(segments), tmp_path / "segments.csv")) == segments
    assert read_segments(write_csv(segments_frame([]), tmp_path / "empty.csv")) == []


def test_process_corpus(corpus, config):
    outcomes = process_corpus(corpus, config, methods=("none", "wikey"), n_jobs=1)
    assert len(outcomes) == 6
    n_labels, n_features = count_outcomes(outcomes)
    assert n_labels == 6
    assert n_features == len(corpus_features(outcomes)) >= 5
    table = segmentation_table(outcomes, config.seg.tolerance, ("none", "wikey"))
    assert list(table["method"]) == ["mad_dual_threshold", "wikey_baseline"]
    assert (table["n_truth"] == 6).all()
    assert table.loc[0, "dr"] >= 5 / 6


def test_train_and_identify(tmp_path, corpus, config):
    features = corpus_features(process_corpus(corpus, config, n_jobs=1))
    first = features[0].feature
    path = tmp_path / "features.csv"
    write_features(features, path, first.params, first.p, first.n_pairs, config.digest())
    gallery = train(TrainConfig(feature_files=[str(path)], output_path=str(tmp_path / "gallery.csv")))
    assert len(gallery) == len(features)
    assert gallery.subjects == ["S01", "S02"]
    assert build_gallery(load_feature_files([path]), subjects=["S02"]).subjects == ["S02"]

    config = config.model_copy(deep=True)
    config.knn.k = 1
    service = IdentificationService(tmp_path / "gallery.csv", config)
    assert service.readiness()["ready"] is False
    results = service.identify(load_trace(corpus / "traces" / "trace_0000.csit"))
    assert service.readiness()["ready"] is True
    assert len(results) == 1
    assert results[0].predicted == "S01"


def test_train_rejects_mixed_files(tmp_path, rng, config):
    pipeline = Pipeline(config)
    a = features_for_subject("a", pipeline, _random_components(rng, 1), [Segment(0, 800)], "A")
    b = features_for_subject("b", pipeline, _random_components(rng, 2), [Segment(0, 800)], "B")
    write_features(a, tmp_path / "a.csv", pipeline.extractor.params, 4, 1)
    write_features(b, tmp_path / "b.csv", pipeline.extractor.params, 4, 2)
    with pytest.raises(DomainError):
        load_feature_files([tmp_path / "a.csv", tmp_path / "b.csv"])
    shorter = Pipeline(PipelineConfig.model_validate({"seg": {"timelen2": 1000}}))
    c = features_for_subject("c", shorter, _random_components(rng, 1), [Segment(0, 800)], "C")
    assert c[0].feature.level < a[0].feature.level
    write_features(c, tmp_path / "c.csv", shorter.extractor.params, 4, 1)
    with pytest.raises(DomainError):
        load_feature_files([tmp_path / "a.csv", tmp_path / "c.csv"])
    with pytest.raises(DomainError):
        train(TrainConfig())


def test_missing_gallery_reports_not_ready(tmp_path, labelled_trace):
    service = IdentificationService(tmp_path / "nope.csv")
    with pytest.raises(DomainError):
        service.identify(labelled_trace[0])
    state = service.readiness()
    assert state["ready"] is False and state["error"]


def test_identify_without_crossings(tmp_path, rng):
    pipeline = Pipeline(PipelineConfig())
    entries = [
        features_for_subject(f"g{i}", pipeline, _random_components(rng), [Segment(0, 800)], s)[0]
        for i, s in enumerate("AAB")
    ]
    Gallery.from_features(entries).save(tmp_path / "gallery.csv")
    config = PipelineConfig.model_validate({"seg": {"t1": 50.0, "t2": 10.0}})
    quiet, _ = synth_trace([], SynthSpec(duration_s=4.0))
    assert IdentificationService(tmp_path / "gallery.csv", config).identify(quiet) == []


def test_reload_switches_gallery(tmp_path, rng):
    pipeline = Pipeline(PipelineConfig())
    entries = [features_for_subject("g", pipeline, _random_components(rng), [Segment(0, 800)], "A")[0]]
    Gallery.from_features(entries).save(tmp_path / "other.csv")
    service = IdentificationService(tmp_path / "missing.csv")
    service.reload(tmp_path / "other.csv")
    assert service.readiness() == {"ready": True, "error": None, "gallery": str(tmp_path / "other.csv")}
