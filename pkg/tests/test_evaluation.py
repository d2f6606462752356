import math

import numpy as np
import pandas as pd
import pytest

from freesense.classifier import pairwise_distances
from freesense.config import PipelineConfig
from freesense.dataset import describe_split, split_per_subject
from freesense.errors import DomainError
from freesense.evaluation import EvalProtocol, evaluate_identification, evaluate_with_distances, subject_subsets
from freesense.features import LabeledFeature, ShapeFeature


def _features(rng, subjects, per_subject, spread=0.0, length=6):
    out = []
    for s_idx, subject in enumerate(subjects):
        center = np.full((1, 2, length), float(3 * s_idx))
        for i in range(per_subject):
            coeffs = center + spread * rng.normal(size=center.shape)
            direction = "ltr" if i % 2 == 0 else "rtl"
            out.append(LabeledFeature(f"{subject}-{i}", subject, ShapeFeature(coeffs, 1, 2 * length), direction))
    return out


def test_split_per_subject():
    subjects = ["A"] * 10 + ["B"] * 7
    train, test = split_per_subject(subjects, 4, 5, seed=1)
    assert len(train) == 8
    assert len(test) == 5 + 3
    assert not set(train) & set(test)
    assert split_per_subject(subjects, 4, 5, seed=1) == (train, test)
    with pytest.raises(DomainError):
        split_per_subject(subjects, 7, 5)
    assert "Train set" in describe_split(subjects, train, test)


def test_subsets_enumerated_when_few():
    subsets = subject_subsets(list("FEDCBA"), 3, 200, seed=0)
    assert len(subsets) == math.comb(6, 3)
    assert len(set(subsets)) == len(subsets)
    assert subsets[0] == ("A", "B", "C")


def test_subsets_sampled_when_many():
    names = [f"S{i:02d}" for i in range(20)]
    first = subject_subsets(names, 10, 50, seed=3)
    assert len(first) == 50
    assert all(len(s) == 10 and len(set(s)) == 10 for s in first)
    assert first == subject_subsets(names, 10, 50, seed=3)
    assert first != subject_subsets(names, 10, 50, seed=4)


def test_perfect_gallery(rng):
    features = _features(rng, ["A", "B", "C"], 8)
    protocol = EvalProtocol(train_per_subject=3, test_per_subject=5, k=3, train_sizes=(1, 3))
    report = evaluate_identification(features, protocol)
    assert report.accuracy == 1.0
    assert np.array_equal(np.diag(report.confusion.to_numpy()), [5, 5, 5])
    assert report.confusion.to_numpy().sum() == 15
    assert list(report.accuracy_vs_subjects["n_subjects"]) == [2, 3]
    assert list(report.accuracy_vs_subjects["n_subsets"]) == [3, 1]
    assert (report.accuracy_vs_trainsize["accuracy"] == 1.0).all()


def test_direction_breakdown(rng):
    features = _features(rng, ["A", "B"], 10)
    report = evaluate_identification(features, EvalProtocol(train_per_subject=4, test_per_subject=6, train_sizes=(4,)))
    table = report.accuracy_by_direction
    assert set(table["direction"]) <= {"ltr", "rtl"}
    assert table["n_queries"].sum() == 12
    assert len(report.predictions) == 12


def test_deterministic(rng):
    features = _features(rng, ["A", "B", "C", "D"], 9, spread=2.0)
    protocol = EvalProtocol(train_per_subject=4, test_per_subject=5, k=3, max_subsets=3, train_sizes=(2, 4))
    distances = pairwise_distances([f.feature for f in features])
    first = evaluate_with_distances(features, distances, protocol)
    second = evaluate_with_distances(features, distances, protocol)
    pd.testing.assert_frame_equal(first.subset_scores, second.subset_scores)
    pd.testing.assert_frame_equal(first.accuracy_vs_trainsize, second.accuracy_vs_trainsize)
    assert first.accuracy == second.accuracy
    # C(4, 2) = 6 > 3, so the pair sweep is sampled
    assert (first.subset_scores["n_subjects"] == 2).sum() == 3


def test_train_size_capped_by_available_samples(rng):
    features = _features(rng, ["A", "B"], 12)
    report = evaluate_identification(features, EvalProtocol(train_per_subject=2, test_per_subject=10, train_sizes=(2, 8)))
    rows = report.accuracy_vs_trainsize.set_index("train_per_subject")["n_queries"]
    assert rows[2] == 20
    assert rows[8] == 8


def test_rejects_bad_inputs(rng):
    with pytest.raises(DomainError):
        evaluate_identification(_features(rng, ["A"], 30))
    with pytest.raises(DomainError):
        evaluate_identification(_features(rng, ["A", "B"], 5), EvalProtocol(train_per_subject=5, train_sizes=(1,)))
    features = _features(rng, ["A", "B"], 6)
    with pytest.raises(DomainError):
        evaluate_identification(
            features, EvalProtocol(train_per_subject=2, test_per_subject=2, subject_counts=(3,), train_sizes=(2,))
        )


def test_protocol_from_config():
    config = PipelineConfig()
    config.knn.k = 5
    config.eval.subject_counts = [2, 4]
    protocol = EvalProtocol.from_config(config)
    assert protocol.k == 5
    assert protocol.subject_counts == (2, 4)
    assert protocol.train_sizes == (10, 20, 30)
