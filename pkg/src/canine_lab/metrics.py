"""Multiclass evaluation metrics over a confusion matrix.

counts[t][p] holds the number of items of true class t predicted as p.
Per-class rates use the one-vs-rest TP/FP/TN/FN decomposition; the error
magnitudes (MAE/MSE/RMSE) treat class labels as ordinal codes, 1..k by
default, so a two-sector miss costs more than a neighbor miss.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyMatrix, LabelOutOfRange, LengthMismatch, MetricsError


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (k, k) ints, rows = true class
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise MetricsError(f"counts must be square, got shape {c.shape}")
        if (c < 0).any():
            raise MetricsError("counts must be non-negative")
        if not self.class_names:
            object.__setattr__(
                self, "class_names", tuple(str(i) for i in range(c.shape[0]))
            )
        if len(self.class_names) != c.shape[0]:
            raise MetricsError("class_names length must match matrix size")
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def predicted_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def confusion(
    true_labels: Sequence[int],
    predicted_labels: Sequence[int],
    k: int,
    class_names: Sequence[str] | None = None,
) -> ConfusionMatrix:
    """Tally per-item (true, predicted) index pairs into a k x k matrix."""
    t = np.asarray(true_labels)
    p = np.asarray(predicted_labels)
    if t.shape != p.shape or t.ndim != 1:
        raise LengthMismatch(f"label sequences differ: {t.shape} vs {p.shape}")
    if t.size and (t.min() < 0 or t.max() >= k or p.min() < 0 or p.max() >= k):
        raise LabelOutOfRange(f"labels must lie in 0..{k - 1}")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t.astype(int), p.astype(int)), 1)
    names = tuple(class_names) if class_names else tuple(str(i) for i in range(k))
    return ConfusionMatrix(counts=counts, class_names=names)


@dataclass
class PerClassMetrics:
    name: str
    support: int
    tp: int
    fp: int
    fn: int
    tn: int
    recall: float
    precision: float
    recall_defined: bool
    precision_defined: bool
    ovr_accuracy: float


@dataclass
class MetricReport:
    class_names: tuple[str, ...]
    counts: list[list[int]]
    accuracy: float
    per_class: list[PerClassMetrics]
    weighted_recall: float
    macro_recall: float
    mae: float
    mse: float
    rmse: float
    class_values: list[float]
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "counts": self.counts,
            "accuracy": self.accuracy,
            "per_class": [
                {
                    "name": c.name,
                    "support": c.support,
                    "tp": c.tp,
                    "fp": c.fp,
                    "fn": c.fn,
                    "tn": c.tn,
                    "recall": c.recall,
                    "precision": c.precision,
                    "recall_defined": c.recall_defined,
                    "precision_defined": c.precision_defined,
                    "ovr_accuracy": c.ovr_accuracy,
                }
                for c in self.per_class
            ],
            "weighted_recall": self.weighted_recall,
            "macro_recall": self.macro_recall,
            "mae": self.mae,
            "mse": self.mse,
            "rmse": self.rmse,
            "class_values": self.class_values,
            "notes": self.notes,
        }

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)

    def to_text(self) -> str:
        lines = [f"Overall accuracy: {self.accuracy * 100:.2f}%"]
        for c in self.per_class:
            prec = f"{c.precision * 100:.2f}%" if c.precision_defined else "undefined (no predictions)"
            rec = f"{c.recall * 100:.2f}%" if c.recall_defined else "undefined (no support)"
            lines.append(
                f"- Class {c.name}: recall {rec} ({c.tp}/{c.tp + c.fn}), "
                f"precision {prec} ({c.tp}/{c.tp + c.fp})"
            )
        lines.append(f"Macro recall: {self.macro_recall * 100:.2f}%")
        lines.append(f"Weighted recall: {self.weighted_recall * 100:.2f}%")
        lines.append(f"MAE {self.mae:.5f}  MSE {self.mse:.5f}  RMSE {self.rmse:.5f}")
        for note in self.notes:
            lines.append(f"NOTE: {note}")
        return "\n".join(lines)

    def compare(self, reference: dict, tolerance: float = 0.005) -> list[dict]:
        """List metrics that deviate from externally reported reference values.

        reference keys: "accuracy", "macro_recall", "mae", "mse", "rmse",
        "recall"/"precision" (per-class lists or name->value maps).  Values
        are fractions, not percentages.  Deviations beyond the tolerance
        are returned and appended to the report notes.
        """
        found: list[dict] = []

        def check(metric: str, computed: float, expected: float) -> None:
            if abs(computed - expected) > tolerance:
                found.append(
                    {
                        "metric": metric,
                        "computed": computed,
                        "reference": expected,
                        "difference": computed - expected,
                    }
                )

        for key in ("accuracy", "macro_recall", "weighted_recall", "mae", "mse", "rmse"):
            if key in reference:
                check(key, getattr(self, key), float(reference[key]))
        for key in ("recall", "precision"):
            if key not in reference:
                continue
            ref = reference[key]
            items = ref.items() if isinstance(ref, dict) else zip(self.class_names, ref)
            by_name = {c.name: c for c in self.per_class}
            for name, expected in items:
                check(f"{key}[{name}]", getattr(by_name[str(name)], key), float(expected))
        for d in found:
            self.notes.append(
                f"{d['metric']} computed from the matrix is {d['computed']:.5f} "
                f"but the reference reports {d['reference']:.5f} "
                f"(difference {d['difference']:+.5f})"
            )
        return found


def evaluate(cm: ConfusionMatrix, class_values: Sequence[float] | None = None) -> MetricReport:
    """Compute all report metrics from a confusion matrix.

    class_values are the ordinal codes used for MAE/MSE/RMSE; they default
    to 1..k.  Undefined per-class rates (zero support or zero predictions)
    are reported as 0.0 with the corresponding *_defined flag cleared.
    """
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix has no items")
    values = np.asarray(class_values if class_values is not None else range(1, cm.k + 1), dtype=float)
    if values.shape != (cm.k,):
        raise MetricsError(f"need {cm.k} class values, got {values.shape}")

    counts = cm.counts
    support = cm.support()
    predicted = cm.predicted_totals()
    tp = np.diag(counts)
    fn = support - tp
    fp = predicted - tp
    tn = total - support - predicted + tp

    per_class: list[PerClassMetrics] = []
    recalls: list[float] = []
    for i in range(cm.k):
        r_def = support[i] > 0
        p_def = predicted[i] > 0
        recall = float(tp[i] / support[i]) if r_def else 0.0
        precision = float(tp[i] / predicted[i]) if p_def else 0.0
        per_class.append(
            PerClassMetrics(
                name=cm.class_names[i],
                support=int(support[i]),
                tp=int(tp[i]),
                fp=int(fp[i]),
                fn=int(fn[i]),
                tn=int(tn[i]),
                recall=recall,
                precision=precision,
                recall_defined=bool(r_def),
                precision_defined=bool(p_def),
                ovr_accuracy=float((tp[i] + tn[i]) / total),
            )
        )
        if r_def:
            recalls.append(recall)

    accuracy = float(tp.sum() / total)
    weighted_recall = float(sum(c.recall * c.support for c in per_class) / total)
    macro_recall = float(np.mean(recalls)) if recalls else 0.0

    diff = values[:, None] - values[None, :]
    mae = float((counts * np.abs(diff)).sum() / total)
    mse = float((counts * diff**2).sum() / total)

    return MetricReport(
        class_names=cm.class_names,
        counts=counts.tolist(),
        accuracy=accuracy,
        per_class=per_class,
        weighted_recall=weighted_recall,
        macro_recall=macro_recall,
        mae=mae,
        mse=mse,
        rmse=math.sqrt(mse),
        class_values=values.tolist(),
    )


def evaluate_labels(
    true_labels: Sequence[int],
    predicted_labels: Sequence[int],
    k: int,
    class_names: Sequence[str] | None = None,
    class_values: Sequence[float] | None = None,
) -> MetricReport:
    return evaluate(confusion(true_labels, predicted_labels, k, class_names), class_values)


def load_predictions(path) -> tuple[list[str], list[str], list[str]]:
    """Read prediction JSON lines {"case", "true", "pred"} from a file."""
    cases: list[str] = []
    true: list[str] = []
    pred: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                cases.append(str(rec["case"]))
                true.append(str(rec["true"]))
                pred.append(str(rec["pred"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MetricsError(f"{path}:{lineno}: malformed prediction line ({exc})") from exc
    return cases, true, pred


def labels_to_indices(labels: Sequence[str]) -> tuple[list[int], tuple[str, ...]]:
    """Map string labels onto 0..k-1 using a known sector ordering if possible.

    Recognizes the 3/4/5-sector vocabularies so ordinal codes follow the
    distal-to-mesial class order rather than alphabetical accident; unknown
    vocabularies fall back to sorted unique labels.
    """
    known = (("A", "B", "C"), ("I", "II", "III", "IV"), ("S1", "S2", "S3", "S4", "S5"))
    present = set(labels)
    for vocab in known:
        if present <= set(vocab):
            order = tuple(vocab)
            break
    else:
        order = tuple(sorted(present))
    index = {name: i for i, name in enumerate(order)}
    return [index[x] for x in labels], order
