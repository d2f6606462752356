"""Corpus-scale checks on the synthetic generator."""

import pytest

from freesense.cli import main
from freesense.config import PipelineConfig, SynthSection
from freesense.evaluation import EvalProtocol, evaluate_identification
from freesense.pipeline import corpus_features, process_corpus, segmentation_table
from freesense.synth import synth_corpus

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def outcomes(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    synth_corpus(out, SynthSection(seed=42, subjects=6, separation=0.7, samples_per_subject=40), n_jobs=1)
    return process_corpus(out, PipelineConfig(), methods=("none", "wikey"), n_jobs=1)


@pytest.fixture(scope="module")
def report(outcomes):
    return evaluate_identification(corpus_features(outcomes), EvalProtocol())


def test_segmentation_rates(outcomes):
    table = segmentation_table(outcomes[:100], PipelineConfig().seg.tolerance, ("none", "wikey")).set_index("method")
    ours, baseline = table.loc["mad_dual_threshold"], table.loc["wikey_baseline"]
    assert ours["n_truth"] == 100
    assert ours["dr"] >= 0.90
    assert ours["er"] <= 0.10
    assert ours["er"] <= baseline["er"]


def test_identification_accuracy(report):
    assert report.accuracy >= 0.85
    assert report.predictions.shape[0] == 120


def test_fewer_subjects_is_easier(report):
    by_count = report.accuracy_vs_subjects.set_index("n_subjects")["mean_accuracy"]
    assert list(by_count.index) == [2, 3, 4, 5, 6]
    assert by_count[2] >= by_count[6]


def test_more_training_helps(report):
    by_size = report.accuracy_vs_trainsize.set_index("train_per_subject")["accuracy"]
    assert by_size[30] >= by_size[10]


def test_zero_separation_is_chance(tmp_path):
    section = SynthSection(seed=7, subjects=6, separation=0.0, samples_per_subject=55)
    synth_corpus(tmp_path, section, n_jobs=1)
    features = corpus_features(process_corpus(tmp_path, PipelineConfig(), n_jobs=1))
    result = evaluate_identification(features, EvalProtocol(test_per_subject=35, train_sizes=(20,)))
    assert len(result.predictions) >= 200
    assert abs(result.accuracy - 1 / 6) <= 0.10


def test_evaluate_is_byte_identical(tmp_path):
    settings = [
        "--set", "synth.subjects=3", "--set", "synth.samples_per_subject=10",
        "--set", "eval.train_per_subject=4", "--set", "eval.test_per_subject=4", "--set", "eval.train_sizes=2,4",
    ]
    corpus = tmp_path / "corpus"
    assert main(["synth", "--corpus", "--out", str(corpus), "--run-dir", str(tmp_path / "synth"), *settings]) == 0
    for run in ("first", "second"):
        assert main(["evaluate", "--corpus", str(corpus), "--run-dir", str(tmp_path / run), *settings]) == 0
    names = sorted(p.name for p in (tmp_path / "first").glob("*.csv"))
    assert "confusion.csv" in names and "accuracy_vs_subjects.csv" in names
    for name in names:
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes(), name
