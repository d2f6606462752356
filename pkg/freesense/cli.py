import argparse
import hashlib
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence

import pandas as pd

from . import __version__
from .config import PipelineConfig, resolve_config, settings
from .errors import ConfigError, FreeSenseError, StageError
from .evaluation import EvalProtocol, evaluate_identification
from .features import write_features
from .inference import IdentificationService
from .pipeline import (
    Pipeline,
    TraceOutcome,
    corpus_features,
    count_outcomes,
    features_for_subject,
    features_with_labels,
    process_corpus,
    read_segments,
    segmentation_table,
    segments_frame,
)
from .report import write_csv, write_evaluation_report
from .schemas import RunManifest
from .segmentation import Segmenter
from .synth import corpus_specs, load_corpus, subject_names, synth_corpus, synth_profiles, synth_trace
from .train import TrainConfig, train
from .trace import load_trace, read_labels, save_trace, write_labels

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except (StageError, ConfigError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunContext:
    """Run directory bookkeeping: input hashes, outputs and the manifest."""

    def __init__(self, command: str, config: PipelineConfig, run_dir: Path):
        self.command = command
        self.config = config
        self.run_dir = run_dir
        self.inputs: Dict[str, str] = {}
        self.outputs: List[str] = []

    def add_input(self, path: Optional[str]) -> None:
        if not path:
            return
        p = Path(path)
        with stage("io"):
            if p.is_dir():
                for child in sorted(c for c in p.rglob("*") if c.is_file()):
                    self.inputs[str(child)] = sha256_file(child)
            else:
                self.inputs[str(p)] = sha256_file(p)

    def output(self, path: Path) -> Path:
        self.outputs.append(str(path))
        return path

    def path(self, name: str, override: Optional[str] = None) -> Path:
        return Path(override) if override else self.run_dir / name

    def write_manifest(self) -> Path:
        manifest = RunManifest(
            command=self.command,
            version=__version__,
            config=self.config.flat(),
            config_hash=self.config.digest(),
            seeds={"eval.seed": self.config.eval.seed, "synth.seed": self.config.synth.seed},
            inputs=self.inputs,
            outputs=self.outputs,
        )
        path = self.run_dir / "manifest.json"
        path.write_text(manifest.model_dump_json(indent=2) + "\n")
        return path


def cmd_synth(args, config: PipelineConfig, run: RunContext) -> None:
    section = config.synth
    with stage("synth"):
        if args.corpus:
            manifest = synth_corpus(args.out, section, min_spacing=config.seg.timelen2)
            run.output(Path(args.out) / "manifest.json")
            print(f"Wrote corpus of {len(manifest.traces)} traces ({section.subjects} subjects) to {args.out}")
            return
        profiles = synth_profiles(section)
        subject = args.subject or subject_names(section.subjects)[0]
        chosen = [p for p in profiles if p.subject == subject]
        if not chosen:
            raise ConfigError(f"unknown subject {subject!r}", key="subject")
        single = section.model_copy(update={"n_traces": 1, "rtl_fraction": 1.0 if args.direction == "rtl" else 0.0})
        spec = corpus_specs(single, chosen, min_spacing=config.seg.timelen2)[0]
        trace, labels = synth_trace(chosen, spec)
        out = Path(args.out)
        run.output(save_trace(trace, out))
        run.output(write_labels(labels, out.with_suffix(".labels.csv")))
        print(f"Wrote {trace.n_frames} frames ({trace.n_streams} streams) with {len(labels)} crossing(s) to {out}")


def cmd_filter(args, config: PipelineConfig, run: RunContext) -> None:
    run.add_input(args.trace)
    with stage("io"):
        trace = load_trace(args.trace)
    with stage("filter"):
        filtered = Pipeline(config).filter(trace)
    with stage("io"):
        out = run.output(save_trace(filtered, run.path("filtered.csit", args.out)))
    print(f"Filtered {trace.n_streams} streams x {trace.n_frames} frames -> {out}")


def cmd_segment(args, config: PipelineConfig, run: RunContext) -> None:
    methods = ("none", "wikey") if args.baseline == "wikey" else ("none",)
    tol = config.seg.tolerance
    if args.corpus:
        run.add_input(args.corpus)
        with stage("segment"):
            outcomes = process_corpus(args.corpus, config, methods=methods, with_features=False)
            table = segmentation_table(outcomes, tol, methods)
    else:
        run.add_input(args.trace)
        run.add_input(args.labels)
        with stage("io"):
            trace = load_trace(args.trace)
            labels = read_labels(args.labels) if args.labels else None
        pipeline = Pipeline(config)
        with stage("filter"):
            filtered = trace if args.filtered else pipeline.filter(trace)
        with stage("pca"):
            components = pipeline.components(filtered)
        with stage("segment"):
            detections = {m: Segmenter.from_config(config.seg, m).detect(components) for m in methods}
        for method, segments in detections.items():
            name = "segments.csv" if method == "none" else f"segments_{method}.csv"
            run.output(write_csv(segments_frame(segments), run.path(name)))
            print(f"{method}: {len(segments)} segment(s)")
        if labels is None:
            return
        outcome = TraceOutcome(Path(args.trace).stem, labels, detections)
        table = segmentation_table([outcome], tol, methods)
    run.output(write_csv(table, run.path("segmentation.csv")))
    for row in table.itertuples():
        print(f"{row.method:20} | DR: {row.dr:.4f} | ER: {row.er:.4f} | detected: {row.n_detected}")


def cmd_extract(args, config: PipelineConfig, run: RunContext) -> None:
    pipeline = Pipeline(config)
    if args.corpus:
        run.add_input(args.corpus)
        with stage("extract"):
            outcomes = process_corpus(args.corpus, config)
        features = corpus_features(outcomes)
        manifest, _ = load_corpus(args.corpus)
        n_pairs = manifest.n_tx * manifest.n_rx
        n_labels, _ = count_outcomes(outcomes)
        print(f"Matched {len(features)} of {n_labels} labelled crossings")
    else:
        if not (args.labels or args.subject):
            raise ConfigError("extract needs --labels or --subject to name the samples", key="subject")
        for p in (args.trace, args.segments, args.labels):
            run.add_input(p)
        with stage("io"):
            trace = load_trace(args.trace)
            segments = read_segments(args.segments)
            labels = read_labels(args.labels) if args.labels else None
        with stage("filter"):
            filtered = trace if args.filtered else pipeline.filter(trace)
        with stage("pca"):
            components = pipeline.components(filtered)
        n_pairs = components.n_pairs
        name = Path(args.trace).stem
        with stage("extract"):
            if labels is not None:
                features = features_with_labels(name, pipeline, components, segments, labels)
            else:
                features = features_for_subject(name, pipeline, components, segments, args.subject, args.direction)
        print(f"Extracted {len(features)} feature(s) from {len(segments)} segment(s)")
    with stage("extract"):
        out = run.path("features.csv", args.out)
        write_features(
            features,
            out,
            pipeline.extractor.params,
            config.pca.components,
            n_pairs,
            config_hash=config.digest(),
            level=pipeline.extractor.level,
        )
    run.output(out)


def cmd_train(args, config: PipelineConfig, run: RunContext) -> None:
    for p in args.features:
        run.add_input(p)
    cfg = TrainConfig(feature_files=list(args.features), output_path=str(run.path("gallery.csv", args.out)))
    with stage("train"):
        gallery = train(cfg, config_hash=config.digest())
    run.output(Path(cfg.output_path))
    print(f"Gallery: {len(gallery)} samples, {len(gallery.subjects)} subjects -> {cfg.output_path}")


def cmd_identify(args, config: PipelineConfig, run: RunContext) -> None:
    run.add_input(args.trace)
    run.add_input(args.gallery)
    with stage("io"):
        trace = load_trace(args.trace)
    service = IdentificationService(args.gallery, config)
    with stage("identify"):
        results = service.identify(trace, filtered=args.filtered)
    rows = [
        {
            "j_begin": r.j_begin,
            "j_end": r.j_end,
            "predicted": r.predicted,
            "distance": r.neighbors[0]["distance"],
            "neighbors": ";".join(f"{n['subject']}:{n['distance']!r}" for n in r.neighbors),
        }
        for r in results
    ]
    df = pd.DataFrame(rows, columns=["j_begin", "j_end", "predicted", "distance", "neighbors"])
    out = run.output(write_csv(df, run.path("identifications.csv", args.out)))
    for r in results:
        print(f"<{r.j_begin}, {r.j_end}> -> {r.predicted}")
    print(f"{len(results)} identification(s) -> {out}")


def cmd_evaluate(args, config: PipelineConfig, run: RunContext) -> None:
    run.add_input(args.corpus)
    methods = ("none", "wikey")
    with stage("segment"):
        outcomes = process_corpus(args.corpus, config, methods=methods)
        table = segmentation_table(outcomes, config.seg.tolerance, methods)
    run.output(write_csv(table, run.path("segmentation.csv")))
    features = corpus_features(outcomes)
    if features:
        with stage("extract"):
            first = features[0].feature
            write_features(features, run.path("features.csv"), first.params, first.p, first.n_pairs, config.digest())
        run.output(run.path("features.csv"))
    with stage("evaluate"):
        report = evaluate_identification(features, EvalProtocol.from_config(config), n_jobs=settings.N_JOBS)
        for path in write_evaluation_report(report, run.run_dir):
            run.output(path)
    print("===== SEGMENTATION =====")
    for row in table.itertuples():
        print(f"{row.method:20} | DR: {row.dr:.4f} | ER: {row.er:.4f}")
    print("===== IDENTIFICATION =====")
    print(f"accuracy: {report.accuracy:.4f} over {len(report.predictions)} queries")
    for row in report.accuracy_vs_subjects.itertuples():
        print(f"  {row.n_subjects} subjects | mean accuracy: {row.mean_accuracy:.4f} ({row.n_subsets} subsets)")
    for row in report.accuracy_vs_trainsize.itertuples():
        print(f"  {row.train_per_subject:3d} train/subject | accuracy: {row.accuracy:.4f}")


COMMANDS = {
    "synth": cmd_synth,
    "filter": cmd_filter,
    "segment": cmd_segment,
    "extract": cmd_extract,
    "train": cmd_train,
    "identify": cmd_identify,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value or YAML config file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    common.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    common.add_argument("--run-dir", help="output directory (default: RUN_ROOT/<command>)")
    common.add_argument("--log-level", default=None)
    common.add_argument("--n-jobs", type=int, default=None)

    parser = argparse.ArgumentParser(prog="freesense", description="WiFi CSI human identification pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic traces")
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", action="store_true", help="write a labelled corpus directory")
    p.add_argument("--subject")
    p.add_argument("--direction", choices=["ltr", "rtl"], default="ltr")

    p = sub.add_parser("filter", parents=[common], help="low-pass filter a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out")

    p = sub.add_parser("segment", parents=[common], help="detect LOS crossings")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace")
    src.add_argument("--corpus")
    p.add_argument("--labels")
    p.add_argument("--filtered", action="store_true", help="input trace is already filtered")
    p.add_argument("--baseline", choices=["none", "wikey"], default="none")

    p = sub.add_parser("extract", parents=[common], help="DWT shape features for segments")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace")
    src.add_argument("--corpus")
    p.add_argument("--segments")
    p.add_argument("--labels")
    p.add_argument("--subject")
    p.add_argument("--direction", choices=["ltr", "rtl"], default="ltr")
    p.add_argument("--filtered", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("train", parents=[common], help="build a gallery from feature files")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--out")

    p = sub.add_parser("identify", parents=[common], help="identify the subject of each crossing")
    p.add_argument("--trace", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--filtered", action="store_true")
    p.add_argument("--out")

    p = sub.add_parser("evaluate", parents=[common], help="segmentation and identification report for a corpus")
    p.add_argument("--corpus", required=True)
    return parser


def configure_logging(level: Optional[str]) -> None:
    logging.basicConfig(
        level=(level or settings.LOG_LEVEL).upper(), format=LOG_FORMAT, stream=sys.stderr, force=True
    )


def run_pipeline(command: str, args: argparse.Namespace, config: PipelineConfig) -> int:
    run_dir = Path(args.run_dir) if args.run_dir else Path(settings.RUN_ROOT) / command
    run_dir.mkdir(parents=True, exist_ok=True)
    run = RunContext(command, config, run_dir)
    COMMANDS[command](args, config, run)
    run.write_manifest()
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    if args.n_jobs is not None:
        settings.N_JOBS = args.n_jobs
    try:
        config = resolve_config(args.config, args.overrides)
        if args.print_config:
            sys.stdout.write(config.to_text())
            return 0
        if args.command == "extract" and args.trace and not args.segments:
            raise ConfigError("extract --trace needs --segments", key="segments")
        return run_pipeline(args.command, args, config)
    except FreeSenseError as exc:
        sys.stderr.write(json.dumps(exc.to_payload(), sort_keys=True) + "\n")
        cause = exc.cause if isinstance(exc, StageError) else exc
        return 2 if isinstance(cause, ConfigError) else 1


if __name__ == "__main__":
    sys.exit(main())
