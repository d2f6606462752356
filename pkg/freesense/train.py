import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

from .classifier import Gallery
from .errors import DomainError
from .features import LabeledFeature, read_features

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    feature_files: List[str] = field(default_factory=list)
    output_path: str = "gallery.csv"
    subjects: Optional[List[str]] = None


def load_feature_files(paths: Sequence[Union[str, Path]]) -> List[LabeledFeature]:
    features: List[LabeledFeature] = []
    reference = None
    for path in paths:
        items, meta = read_features(path)
        key = (meta.p, meta.n_pairs, meta.dwt, meta.level)
        if reference is None:
            reference = key
        elif key != reference:
            raise DomainError(f"{path}: feature parameters differ from {paths[0]}")
        features.extend(items)
    return features


def build_gallery(features: Sequence[LabeledFeature], subjects: Optional[Sequence[str]] = None) -> Gallery:
    """Instance-based gallery: every labelled sample becomes its own entry."""
    if subjects is not None:
        keep = set(subjects)
        features = [f for f in features if f.subject in keep]
    gallery = Gallery.from_features(list(features))
    logger.info("gallery holds %d samples of %d subjects", len(gallery), len(gallery.subjects))
    return gallery


def train(cfg: TrainConfig, config_hash: Optional[str] = None) -> Gallery:
    if not cfg.feature_files:
        raise DomainError("no feature files given")
    gallery = build_gallery(load_feature_files(cfg.feature_files), cfg.subjects)
    gallery.save(cfg.output_path, config_hash=config_hash)
    return gallery
