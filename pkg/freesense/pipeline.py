import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from .config import PipelineConfig, settings
from .features import DwtParams, FeatureExtractor, LabeledFeature, ShapeFeature
from .pca import ComponentSet, pca_project, reorder_by_peak_to_peak
from .preprocessing import TracePreprocessor
from .segmentation import Segmenter, match_segments, segmentation_metrics
from .synth import load_corpus
from .trace import CsiTrace, Segment, SegmentLabel, label_segments, load_trace, read_labels

logger = logging.getLogger(__name__)


@dataclass
class TraceAnalysis:
    filtered: CsiTrace
    components: ComponentSet
    segments: List[Segment]


@dataclass
class TraceOutcome:
    name: str
    labels: List[SegmentLabel]
    segments: Dict[str, List[Segment]]
    features: List[LabeledFeature] = field(default_factory=list)


class Pipeline:
    """filter -> PCA -> segment -> DWT for one trace at a time."""

    def __init__(self, config: PipelineConfig, baseline: Optional[str] = None):
        self.config = config
        self.preprocessor = TracePreprocessor.from_config(config.filter)
        self.segmenter = Segmenter.from_config(config.seg, baseline)
        self.extractor = FeatureExtractor(DwtParams.from_config(config.dwt), max_length=config.seg.timelen2)

    def filter(self, trace: CsiTrace) -> CsiTrace:
        return self.preprocessor.process(trace)

    def components(self, filtered: CsiTrace) -> ComponentSet:
        return reorder_by_peak_to_peak(pca_project(filtered, self.config.pca.components))

    def segment(self, components: ComponentSet) -> List[Segment]:
        return self.segmenter.detect(components)

    def extract(self, components: ComponentSet, segments: Sequence[Segment]) -> List[ShapeFeature]:
        return self.extractor.extract_all(components, segments)

    def analyze(self, trace: CsiTrace, filtered: bool = False) -> TraceAnalysis:
        filtered_trace = trace if filtered else self.filter(trace)
        components = self.components(filtered_trace)
        return TraceAnalysis(filtered_trace, components, self.segment(components))


def label_features(
    name: str,
    components: ComponentSet,
    segments: Sequence[Segment],
    labels: Sequence[SegmentLabel],
    extractor: FeatureExtractor,
    match_tol: int,
) -> List[LabeledFeature]:
    """Features for detections that match a ground-truth label; the rest are dropped."""
    pairs = match_segments(segments, [l.segment for l in labels], match_tol)
    out = []
    for di, ti in sorted(pairs):
        seg, label = segments[di], labels[ti]
        out.append(
            LabeledFeature(
                sample=f"{name}#{seg.j_begin}-{seg.j_end}",
                subject=label.subject,
                feature=extractor.extract(components, seg),
                direction=label.direction,
            )
        )
    return out


def process_labeled_trace(
    config: PipelineConfig,
    trace_path: Union[str, Path],
    labels_path: Union[str, Path],
    methods: Sequence[str] = ("none",),
    with_features: bool = True,
) -> TraceOutcome:
    trace_path = Path(trace_path)
    name = trace_path.stem
    labels = read_labels(labels_path)
    pipeline = Pipeline(config)
    components = pipeline.components(pipeline.filter(load_trace(trace_path)))
    segments = {}
    for method in methods:
        segments[method] = Segmenter.from_config(config.seg, method).detect(components)
    features: List[LabeledFeature] = []
    if with_features:
        features = label_features(
            name, components, segments[methods[0]], labels, pipeline.extractor, config.seg.tolerance
        )
    return TraceOutcome(name, labels, segments, features)


def process_corpus(
    corpus_dir: Union[str, Path],
    config: PipelineConfig,
    methods: Sequence[str] = ("none",),
    with_features: bool = True,
    n_jobs: Optional[int] = None,
) -> List[TraceOutcome]:
    _, items = load_corpus(corpus_dir)
    jobs = (delayed(process_labeled_trace)(config, t, l, methods, with_features) for t, l in items)
    outcomes = Parallel(n_jobs=n_jobs or settings.N_JOBS)(
        tqdm(jobs, total=len(items), desc="corpus", disable=not settings.SHOW_PROGRESS)
    )
    logger.info("processed %d traces from %s", len(outcomes), corpus_dir)
    return list(outcomes)


METHOD_NAMES = {"none": "mad_dual_threshold", "wikey": "wikey_baseline"}


def segmentation_table(outcomes: Sequence[TraceOutcome], match_tol: int, methods: Sequence[str]) -> pd.DataFrame:
    rows = []
    for method in methods:
        n_truth = n_detected = n_correct = 0
        for o in outcomes:
            score = segmentation_metrics(o.segments[method], label_segments(o.labels), match_tol)
            n_truth += score.n_truth
            n_detected += score.n_detected
            n_correct += score.n_correct
        rows.append(
            {
                "method": METHOD_NAMES[method],
                "n_traces": len(outcomes),
                "n_truth": n_truth,
                "n_detected": n_detected,
                "n_correct": n_correct,
                "n_false": n_detected - n_correct,
                "dr": n_correct / n_truth if n_truth else 0.0,
                "er": (n_detected - n_correct) / n_detected if n_detected else 0.0,
            }
        )
    return pd.DataFrame(rows)


def corpus_features(outcomes: Sequence[TraceOutcome]) -> List[LabeledFeature]:
    return [f for o in outcomes for f in o.features]


def segments_frame(segments: Sequence[Segment]) -> pd.DataFrame:
    return pd.DataFrame([(s.j_begin, s.j_end) for s in segments], columns=["j_begin", "j_end"])


def read_segments(path: Union[str, Path]) -> List[Segment]:
    df = pd.read_csv(path)
    return [Segment(int(b), int(e)) for b, e in zip(df["j_begin"], df["j_end"])]


def features_with_labels(
    name: str, pipeline: Pipeline, components: ComponentSet, segments: Sequence[Segment], labels: Sequence[SegmentLabel]
) -> List[LabeledFeature]:
    return label_features(name, components, segments, labels, pipeline.extractor, pipeline.config.seg.tolerance)


def features_for_subject(
    name: str, pipeline: Pipeline, components: ComponentSet, segments: Sequence[Segment], subject: str, direction: str = "ltr"
) -> List[LabeledFeature]:
    return [
        LabeledFeature(f"{name}#{s.j_begin}-{s.j_end}", subject, pipeline.extractor.extract(components, s), direction)
        for s in segments
    ]


def count_outcomes(outcomes: Sequence[TraceOutcome]) -> Tuple[int, int]:
    return sum(len(o.labels) for o in outcomes), sum(len(o.features) for o in outcomes)
