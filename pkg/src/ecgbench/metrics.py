"""Evaluation metrics and report rendering.

Convention fixed here once: confusion-matrix rows are true classes, columns
are predicted classes.  Per-class one-vs-rest quantities follow from that:
TP = c[i][i], FN = row minus TP, FP = column minus TP, TN = the rest.
Precision/recall/F1 use the macro average (unweighted mean over the five
classes) with a zero-denominator-means-zero convention, and ROC-AUC is macro
one-vs-rest with midrank tie handling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ingest import Superclass

__all__ = [
    "ConfusionMatrix",
    "MetricsReport",
    "confusion",
    "accuracy",
    "precision_recall_f1",
    "roc_auc",
    "evaluate_predictions",
    "render_confusion",
    "render_benchmark",
    "BENCHMARK_METRIC_ROWS",
]

NUM_CLASSES = 5
CLASS_NAMES = tuple(c.name for c in Superclass)
BENCHMARK_METRIC_ROWS = ("Accuracy", "ROC-AUC", "F1-Score", "Precision", "Recall")


@dataclass
class ConfusionMatrix:
    """5x5 count matrix; entry [i][j] = samples of true class i predicted j."""

    counts: np.ndarray
    class_names: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.class_names)
        if self.counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def per_class(self, i: int) -> tuple[int, int, int, int]:
        """(TP, FP, FN, TN) for class i."""
        tp = int(self.counts[i, i])
        fn = int(self.counts[i].sum()) - tp
        fp = int(self.counts[:, i].sum()) - tp
        tn = self.total - tp - fp - fn
        return tp, fp, fn, tn


@dataclass
class PerClassMetrics:
    name: str
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: bool = False


@dataclass
class MetricsReport:
    """The headline metric bundle plus the per-class breakdown."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: float
    per_class: list[PerClassMetrics]
    averaging: str = "macro"
    auc_skipped_classes: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def as_row_dict(self) -> dict[str, float]:
        return {
            "Accuracy": self.accuracy,
            "ROC-AUC": self.roc_auc,
            "F1-Score": self.f1,
            "Precision": self.precision,
            "Recall": self.recall,
        }


def confusion(y_true: np.ndarray, y_pred: np.ndarray,
              class_names: tuple[str, ...] = CLASS_NAMES) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError("y_true and y_pred must be equal-length 1-D arrays")
    k = len(class_names)
    if y_true.size and not (
        0 <= y_true.min() and y_true.max() < k and 0 <= y_pred.min() and y_pred.max() < k
    ):
        raise ValueError(f"labels must lie in [0, {k - 1}]")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts=counts, class_names=class_names)


def accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of correct predictions: trace over total.

    In the binary case this equals (TP + TN) / (TP + TN + FP + FN).
    """
    total = cm.total
    if total == 0:
        raise ValueError("cannot compute accuracy of an empty matrix")
    return float(np.trace(cm.counts)) / total


def precision_recall_f1(cm: ConfusionMatrix):
    """Macro precision/recall/F1 plus the per-class values.

    Per class: precision = TP/(TP+FP), recall = TP/(TP+FN),
    F1 = 2*precision*recall/(precision+recall); any zero denominator makes
    that class's value 0 and flags it in the breakdown.
    """
    per_class: list[PerClassMetrics] = []
    for i, name in enumerate(cm.class_names):
        tp, fp, fn, _tn = cm.per_class(i)
        zero_div = False
        if tp + fp > 0:
            prec = tp / (tp + fp)
        else:
            prec, zero_div = 0.0, True
        if tp + fn > 0:
            rec = tp / (tp + fn)
        else:
            rec, zero_div = 0.0, True
        if prec + rec > 0:
            f1 = 2.0 * prec * rec / (prec + rec)
        else:
            f1, zero_div = 0.0, True
        per_class.append(PerClassMetrics(
            name=name, precision=prec, recall=rec, f1=f1,
            support=tp + fn, zero_division=zero_div))
    macro = tuple(
        float(np.mean([getattr(p, attr) for p in per_class]))
        for attr in ("precision", "recall", "f1"))
    return macro[0], macro[1], macro[2], per_class


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the mean rank of their group."""
    order = np.argsort(values, kind="stable")
    sorted_vals = values[order]
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(y_true: np.ndarray, scores: np.ndarray) -> tuple[float, list[str]]:
    """One-vs-rest macro ROC-AUC via the rank statistic.

    Per class the area equals P(score_pos > score_neg) + 0.5 * P(tie), which
    the midrank formula computes exactly.  Classes lacking positives or
    negatives are skipped and reported back; if every class is skipped there
    is nothing to average and that is an error.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape != (y_true.size, NUM_CLASSES):
        raise ValueError(f"scores must be (n, {NUM_CLASSES})")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    aucs: list[float] = []
    skipped: list[str] = []
    for c in range(NUM_CLASSES):
        pos = y_true == c
        n_pos = int(pos.sum())
        n_neg = y_true.size - n_pos
        if n_pos == 0 or n_neg == 0:
            skipped.append(CLASS_NAMES[c])
            continue
        ranks = _midranks(scores[:, c])
        rank_sum = float(ranks[pos].sum())
        aucs.append((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
    if not aucs:
        raise ValueError(
            "ROC-AUC undefined: no class has both positive and negative samples")
    return float(np.mean(aucs)), skipped


def evaluate_predictions(y_true: np.ndarray, probs: np.ndarray,
                         metadata: dict | None = None) -> tuple[MetricsReport, ConfusionMatrix]:
    """Full report from true labels and predicted class probabilities."""
    probs = np.asarray(probs, dtype=np.float64)
    y_pred = np.argmax(probs, axis=1)
    cm = confusion(y_true, y_pred)
    prec, rec, f1, per_class = precision_recall_f1(cm)
    auc, skipped = roc_auc(y_true, probs)
    report = MetricsReport(
        accuracy=accuracy(cm), precision=prec, recall=rec, f1=f1, roc_auc=auc,
        per_class=per_class, auc_skipped_classes=skipped,
        metadata=dict(metadata or {}))
    return report, cm


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _cell(count: int, total: int) -> str:
    pct = 100.0 * count / total if total else 0.0
    return f"{count} {pct:.2f}%"


def render_confusion(cm: ConfusionMatrix, format: str = "text") -> str:
    """Render the matrix with count + percent-of-total cells and margins.

    ``text`` and ``markdown`` show each cell as "<count> <pct>%" with the
    percentage of the grand total to two decimals; ``csv`` emits the raw
    counts (with margins) for downstream recomputation.
    """
    names = cm.class_names
    total = cm.total
    row_totals = cm.counts.sum(axis=1)
    col_totals = cm.counts.sum(axis=0)

    if format == "csv":
        lines = ["true\\predicted," + ",".join(names) + ",total"]
        for i, name in enumerate(names):
            cells = ",".join(str(int(v)) for v in cm.counts[i])
            lines.append(f"{name},{cells},{int(row_totals[i])}")
        lines.append("total," + ",".join(str(int(v)) for v in col_totals)
                     + f",{total}")
        return "\n".join(lines) + "\n"

    header = ["true\\predicted", *names, "total"]
    rows = []
    for i, name in enumerate(names):
        rows.append([name, *(_cell(int(v), total) for v in cm.counts[i]),
                     str(int(row_totals[i]))])
    rows.append(["total", *(str(int(v)) for v in col_totals), str(total)])

    if format == "markdown":
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join([" --- "] * len(header)) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    if format == "text":
        widths = [max(len(str(r[i])) for r in [header] + rows)
                  for i in range(len(header))]
        def fmt(row):
            return "  ".join(str(v).rjust(w) for v, w in zip(row, widths))
        return "\n".join([fmt(header)] + [fmt(r) for r in rows]) + "\n"
    raise ValueError(f"unknown confusion format {format!r}")


def _percent_int(x: float) -> int:
    """Percent rounded half-up to an integer, for the compact tables."""
    return int(np.floor(100.0 * x + 0.5))


def render_benchmark(reports: dict[str, MetricsReport], format: str = "text") -> str:
    """Model-comparison table: metric rows, model columns.

    ``text``/``markdown`` show integer percentages (half-up); ``csv`` keeps
    full precision with one row per (model, metric).
    """
    models = list(reports)
    if format == "csv":
        lines = ["model,metric,value"]
        for name in models:
            for metric, value in reports[name].as_row_dict().items():
                lines.append(f"{name},{metric},{value!r}")
        return "\n".join(lines) + "\n"

    header = ["Metric", *(f"{m} (%)" for m in models)]
    rows = []
    for metric in BENCHMARK_METRIC_ROWS:
        rows.append([metric, *(str(_percent_int(reports[m].as_row_dict()[metric]))
                               for m in models)])
    if format == "markdown":
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "|".join([" --- "] * len(header)) + "|"]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    if format == "text":
        widths = [max(len(str(r[i])) for r in [header] + rows)
                  for i in range(len(header))]
        def fmt(row):
            return "  ".join(str(v).ljust(w) for v, w in zip(row, widths))
        return "\n".join([fmt(header)] + [fmt(r) for r in rows]) + "\n"
    raise ValueError(f"unknown benchmark format {format!r}")
