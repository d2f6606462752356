import logging
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

from sklearn.model_selection import train_test_split

from .errors import DomainError

logger = logging.getLogger(__name__)

RANDOM_STATE = 42


def subject_index(subjects: Sequence[str]) -> Dict[str, List[int]]:
    groups: Dict[str, List[int]] = defaultdict(list)
    for i, s in enumerate(subjects):
        groups[s].append(i)
    return dict(sorted(groups.items()))


def split_per_subject(
    subjects: Sequence[str],
    train_per_subject: int,
    test_per_subject: int,
    seed: int = RANDOM_STATE,
) -> Tuple[List[int], List[int]]:
    """Seeded per-subject split into (train indices, test indices).

    Every subject contributes exactly ``train_per_subject`` training samples and
    up to ``test_per_subject`` test samples from the rest.
    """
    train: List[int] = []
    test: List[int] = []
    for subject, idx in subject_index(subjects).items():
        if len(idx) < train_per_subject + 1:
            raise DomainError(
                f"subject {subject} has {len(idx)} samples; need at least {train_per_subject + 1}"
            )
        n_test = min(test_per_subject, len(idx) - train_per_subject)
        tr, te = train_test_split(idx, train_size=train_per_subject, test_size=n_test, random_state=seed)
        train.extend(sorted(tr))
        test.extend(sorted(te))
    logger.debug("split %d samples into %d train / %d test", len(subjects), len(train), len(test))
    return train, test


def describe_split(subjects: Sequence[str], train: Sequence[int], test: Sequence[int]) -> str:
    total = len(subjects)
    lines = [
        "-" * 30,
        f"Total samples: {total}",
        f"Train set:     {len(train)} ({len(train) / total:.0%})",
        f"Test set:      {len(test)} ({len(test) / total:.0%})",
        "-" * 30,
    ]
    return "\n".join(lines)
