"""Confusion counts, positive-class F1 and the scheduler-comparison table."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(
    probs: list[float], labels: list[int], threshold: float = 0.5
) -> ConfusionCounts:
    """Count tp/fp/fn/tn; a probability exactly at the threshold predicts positive."""
    if len(probs) != len(labels):
        raise ValueError(f"{len(probs)} probabilities vs {len(labels)} labels")
    tp = fp = fn = tn = 0
    for p, y in zip(probs, labels):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
        if y not in (0, 1):
            raise ValueError(f"label {y} is not binary")
        predicted = p >= threshold
        if predicted and y == 1:
            tp += 1
        elif predicted:
            fp += 1
        elif y == 1:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def f1(counts: ConfusionCounts) -> float:
    """Positive-class F1 = 2tp / (2tp + fp + fn); 0 when the denominator is 0."""
    denom = 2 * counts.tp + counts.fp + counts.fn
    return 2 * counts.tp / denom if denom else 0.0


@dataclass(frozen=True)
class ResultRow:
    scheduler: str
    val_mean: float  # F1 as a fraction in [0, 1]
    val_std: float
    test_mean: float
    test_std: float

    def __post_init__(self):
        if self.val_std < 0 or self.test_std < 0:
            raise ValueError("std must be non-negative")


@dataclass(frozen=True)
class ResultTable:
    """Per-scheduler F1 mean +- std over seeds, one row per scheduler."""

    rows: tuple[ResultRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        names = [r.scheduler for r in self.rows]
        if len(set(names)) != len(names):
            raise ValueError("one row per scheduler")


def _cell(mean: float, std: float, best: bool) -> str:
    mark = "*" if best else " "
    return f"{mark} {mean * 100.0:.2f} \N{PLUS-MINUS SIGN} {std * 100.0:.2f}"


def render_table(results: ResultTable) -> str:
    """Fixed-width text table, F1 shown as percent, best mean per column marked '*'.

    Ties are resolved toward the earlier row. Rendering is deterministic.
    """
    if not results.rows:
        raise ValueError("result table is empty")
    best_val = max(range(len(results.rows)), key=lambda i: (results.rows[i].val_mean, -i))
    best_test = max(range(len(results.rows)), key=lambda i: (results.rows[i].test_mean, -i))

    header = ("Scheduler", "F1 Validation", "F1 Test")
    body = [
        (
            row.scheduler,
            _cell(row.val_mean, row.val_std, i == best_val),
            _cell(row.test_mean, row.test_std, i == best_test),
        )
        for i, row in enumerate(results.rows)
    ]
    widths = [max(len(header[c]), *(len(r[c]) for r in body)) for c in range(3)]

    def line(cells: tuple[str, str, str]) -> str:
        return " | ".join(cell.ljust(widths[c]) for c, cell in enumerate(cells)).rstrip()

    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), rule, *(line(r) for r in body)]) + "\n"


def results_csv(results: ResultTable) -> str:
    """Machine-readable companion to the text table (F1 as fractions)."""
    lines = ["scheduler,val_f1_mean,val_f1_std,test_f1_mean,test_f1_std"]
    for row in results.rows:
        lines.append(
            f"{row.scheduler},{row.val_mean!r},{row.val_std!r},"
            f"{row.test_mean!r},{row.test_std!r}"
        )
    return "\n".join(lines) + "\n"


__all__ = [
    "ConfusionCounts",
    "confusion",
    "f1",
    "ResultRow",
    "ResultTable",
    "render_table",
    "results_csv",
]
