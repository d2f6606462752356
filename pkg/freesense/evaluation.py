import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix

from .classifier import classify_distances, pairwise_distances
from .dataset import describe_split, split_per_subject, subject_index
from .errors import DomainError
from .features import LabeledFeature

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalProtocol:
    train_per_subject: int = 20
    test_per_subject: int = 20
    k: int = 3
    seed: int = 42
    max_subsets: int = 200
    subject_counts: Optional[Tuple[int, ...]] = None
    train_sizes: Tuple[int, ...] = (10, 20, 30)
    band: int = 0

    @classmethod
    def from_config(cls, config) -> "EvalProtocol":
        ev = config.eval
        return cls(
            train_per_subject=ev.train_per_subject,
            test_per_subject=ev.test_per_subject,
            k=config.knn.k,
            seed=ev.seed,
            max_subsets=ev.max_subsets,
            subject_counts=tuple(ev.subject_counts) if ev.subject_counts else None,
            train_sizes=tuple(ev.train_sizes),
            band=config.dtw.band,
        )


@dataclass
class EvaluationReport:
    accuracy: float
    accuracy_vs_subjects: pd.DataFrame
    accuracy_vs_trainsize: pd.DataFrame
    confusion: pd.DataFrame
    accuracy_by_direction: pd.DataFrame
    predictions: pd.DataFrame
    subset_scores: pd.DataFrame = field(default_factory=pd.DataFrame)


def subject_subsets(subjects: Sequence[str], m: int, max_subsets: int, seed: int) -> List[Tuple[str, ...]]:
    """Every size-``m`` subset when there are at most ``max_subsets``, else seeded random draws."""
    subjects = sorted(subjects)
    if math.comb(len(subjects), m) <= max_subsets:
        return list(itertools.combinations(subjects, m))
    rng = np.random.default_rng([seed, m])
    return [tuple(sorted(rng.choice(subjects, size=m, replace=False).tolist())) for _ in range(max_subsets)]


def _predict(distances: np.ndarray, features: Sequence[LabeledFeature], train: Sequence[int], test: Sequence[int], k: int) -> List[str]:
    entries = [features[i] for i in train]
    return [classify_distances(distances[q, train], entries, k).predicted for q in test]


def _accuracy(features: Sequence[LabeledFeature], test: Sequence[int], predicted: Sequence[str]) -> float:
    if not test:
        return float("nan")
    return float(np.mean([features[q].subject == p for q, p in zip(test, predicted)]))


def evaluate_with_distances(
    features: Sequence[LabeledFeature], distances: np.ndarray, protocol: EvalProtocol
) -> EvaluationReport:
    subjects = [f.subject for f in features]
    groups = subject_index(subjects)
    names = list(groups)
    if len(names) < 2:
        raise DomainError(f"evaluation needs at least 2 subjects, got {len(names)}")
    train, test = split_per_subject(subjects, protocol.train_per_subject, protocol.test_per_subject, protocol.seed)
    logger.debug("split\n%s", describe_split(subjects, train, test))

    # Full-population run: confusion matrix, per-query predictions, per-direction accuracy.
    predicted = _predict(distances, features, train, test, protocol.k)
    truth = [subjects[q] for q in test]
    accuracy = _accuracy(features, test, predicted)
    confusion = pd.DataFrame(confusion_matrix(truth, predicted, labels=names), index=names, columns=names)
    confusion.index.name = "subject"
    predictions = pd.DataFrame(
        {
            "sample": [features[q].sample for q in test],
            "subject": truth,
            "predicted": predicted,
            "direction": [features[q].direction for q in test],
        }
    )
    by_direction = (
        predictions.assign(correct=predictions["subject"] == predictions["predicted"])
        .groupby("direction", sort=True)["correct"]
        .agg(n_queries="size", accuracy="mean")
        .reset_index()
    )

    # Subject-count sweep over subsets of the same split.
    counts = protocol.subject_counts or tuple(range(2, len(names) + 1))
    subset_rows = []
    for m in counts:
        if m > len(names):
            raise DomainError(f"subject count {m} exceeds the {len(names)} available subjects")
        for subset in subject_subsets(names, m, protocol.max_subsets, protocol.seed):
            keep = set(subset)
            tr = [i for i in train if subjects[i] in keep]
            te = [i for i in test if subjects[i] in keep]
            acc = _accuracy(features, te, _predict(distances, features, tr, te, protocol.k))
            subset_rows.append({"n_subjects": m, "subjects": ",".join(subset), "n_queries": len(te), "accuracy": acc})
    subset_scores = pd.DataFrame(subset_rows, columns=["n_subjects", "subjects", "n_queries", "accuracy"])
    vs_subjects = (
        subset_scores.groupby("n_subjects", sort=True)["accuracy"]
        .agg(n_subsets="size", mean_accuracy="mean", min_accuracy="min", max_accuracy="max")
        .reset_index()
    )

    # Training-set-size sweep with all subjects.
    size_rows = []
    for size in protocol.train_sizes:
        tr, te = split_per_subject(subjects, size, protocol.test_per_subject, protocol.seed)
        acc = _accuracy(features, te, _predict(distances, features, tr, te, protocol.k))
        size_rows.append({"train_per_subject": size, "n_queries": len(te), "accuracy": acc})
    vs_trainsize = pd.DataFrame(size_rows, columns=["train_per_subject", "n_queries", "accuracy"])

    logger.info("identification accuracy %.4f over %d queries, %d subjects", accuracy, len(test), len(names))
    return EvaluationReport(
        accuracy=accuracy,
        accuracy_vs_subjects=vs_subjects,
        accuracy_vs_trainsize=vs_trainsize,
        confusion=confusion,
        accuracy_by_direction=by_direction,
        predictions=predictions,
        subset_scores=subset_scores,
    )


def evaluate_identification(
    features: Sequence[LabeledFeature], protocol: EvalProtocol = EvalProtocol(), n_jobs: int = 1
) -> EvaluationReport:
    subjects = [f.subject for f in features]
    if len(set(subjects)) < 2:
        raise DomainError("evaluation needs at least 2 subjects")
    for size in (protocol.train_per_subject, *protocol.train_sizes):
        split_per_subject(subjects, size, protocol.test_per_subject, protocol.seed)
    distances = pairwise_distances([f.feature for f in features], band=protocol.band, n_jobs=n_jobs)
    return evaluate_with_distances(features, distances, protocol)
