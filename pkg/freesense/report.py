import logging
from pathlib import Path
from typing import List, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from .evaluation import EvaluationReport  # noqa: E402

logger = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "freesense"
plt.rcParams["svg.fonttype"] = "none"


def write_csv(df: pd.DataFrame, path: Union[str, Path], index: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=index, lineterminator="\n")
    return path


def line_plot(x: Sequence, y: Sequence, xlabel: str, ylabel: str, title: str, path: Union[str, Path]) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(list(x), list(y), marker="o")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.set_ylim(0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return Path(path)


def write_evaluation_report(report: EvaluationReport, out_dir: Union[str, Path]) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        write_csv(report.accuracy_vs_subjects, out_dir / "accuracy_vs_subjects.csv"),
        write_csv(report.accuracy_vs_trainsize, out_dir / "accuracy_vs_trainsize.csv"),
        write_csv(report.confusion, out_dir / "confusion.csv", index=True),
        write_csv(report.accuracy_by_direction, out_dir / "accuracy_by_direction.csv"),
        write_csv(report.predictions, out_dir / "predictions.csv"),
        write_csv(report.subset_scores, out_dir / "subset_scores.csv"),
    ]
    subjects = report.accuracy_vs_subjects
    written.append(
        line_plot(
            subjects["n_subjects"],
            subjects["mean_accuracy"],
            "number of subjects",
            "mean accuracy",
            "Accuracy vs. subject count",
            out_dir / "accuracy_vs_subjects.svg",
        )
    )
    sizes = report.accuracy_vs_trainsize
    written.append(
        line_plot(
            sizes["train_per_subject"],
            sizes["accuracy"],
            "training samples per subject",
            "accuracy",
            "Accuracy vs. training-set size",
            out_dir / "accuracy_vs_trainsize.svg",
        )
    )
    logger.info("wrote evaluation report to %s", out_dir)
    return written
