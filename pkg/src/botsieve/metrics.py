"""Per-class precision/recall/F1/support and accuracy for binary labels."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

CLASS_NAMES = {0: "Benign (0)", 1: "Infected (1)"}


class EmptyTestSet(ValueError):
    pass


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class MetricsReport:
    per_class: dict[int, ClassMetrics]
    accuracy: float
    total: int

    @property
    def confusion(self) -> ClassMetrics:
        """Counts with the infected class as positive."""
        return self.per_class[1]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "total": self.total,
            "classes": {str(c): asdict(m) for c, m in self.per_class.items()},
        }

    def format_table(self, title: str = "RandomForest") -> str:
        lines = [f"{'Classifier':<14}{'Category':<14}{'Precision':>10}{'Recall':>8}{'F1-score':>10}{'Support':>9}"]
        for c in (0, 1):
            m = self.per_class[c]
            head = title if c == 0 else ""
            lines.append(f"{head:<14}{CLASS_NAMES[c]:<14}{m.precision:>10.2f}{m.recall:>8.2f}{m.f1:>10.2f}{m.support:>9d}")
        lines.append(f"{'':<14}{'Accuracy':<14}{'':>10}{'':>8}{self.accuracy:>10.2f}{self.total:>9d}")
        return "\n".join(lines)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * (precision * recall) / (precision + recall)


def evaluate_predictions(y_true: Sequence[int], y_pred: Sequence[int]) -> MetricsReport:
    """Score predictions, treating each class in turn as the positive one.

    Zero denominators give 0 for precision and recall.
    """
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred differ in length")
    n = len(y_true)
    if n == 0:
        raise EmptyTestSet("no rows to evaluate")
    # confusion[t][p]
    confusion = [[0, 0], [0, 0]]
    for t, p in zip(y_true, y_pred):
        confusion[int(t)][int(p)] += 1
    per_class = {}
    for c in (0, 1):
        o = 1 - c
        tp, fn = confusion[c][c], confusion[c][o]
        fp, tn = confusion[o][c], confusion[o][o]
        precision = _ratio(tp, tp + fp)
        recall = _ratio(tp, tp + fn)
        per_class[c] = ClassMetrics(precision, recall, f1_score(precision, recall),
                                    tp + fn, tp, fp, tn, fn)
    correct = confusion[0][0] + confusion[1][1]
    return MetricsReport(per_class, correct / n, n)
