"""Token-level tagging metrics and the model comparison report.

Precision, recall, and F1 are percentages computed per tag from
token-level counts. Corpus-level numbers are support-weighted averages
that exclude the outside tag, since "O" dominates annotated text and
would swamp the entity classes. Token accuracy, in contrast, covers
every position.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .data import OUTSIDE_TAG
from .errors import EvaluationError


class TagCounts:
    """Per-tag true-positive / false-positive / false-negative tallies."""

    def __init__(self):
        self.tp: Counter[str] = Counter()
        self.fp: Counter[str] = Counter()
        self.fn: Counter[str] = Counter()

    def tags(self) -> list[str]:
        return sorted(set(self.tp) | set(self.fp) | set(self.fn))

    def support(self, tag: str) -> int:
        return self.tp[tag] + self.fn[tag]

    def total_tokens(self) -> int:
        return sum(self.tp.values()) + sum(self.fn.values())


def accumulate_counts(gold: list[list[str]], predicted: list[list[str]]) -> TagCounts:
    """Tally counts over aligned sentence lists.

    A gold/predicted pair that matches is a TP for that tag; a mismatch
    is an FN for the gold tag and an FP for the predicted one.
    """
    if len(gold) != len(predicted):
        raise EvaluationError(
            f"got {len(gold)} gold sentences but {len(predicted)} predictions"
        )
    counts = TagCounts()
    for i, (g_tags, p_tags) in enumerate(zip(gold, predicted)):
        if len(g_tags) != len(p_tags):
            raise EvaluationError(
                f"sentence {i}: gold has {len(g_tags)} tokens, prediction has {len(p_tags)}"
            )
        for g, p in zip(g_tags, p_tags):
            if g == p:
                counts.tp[g] += 1
            else:
                counts.fn[g] += 1
                counts.fp[p] += 1
    return counts


def precision_recall_f1(counts: TagCounts, tag: str) -> tuple[float, float, float]:
    """Percent precision/recall/F1 for one tag; empty denominators give 0."""
    tp = counts.tp[tag]
    fp = counts.fp[tag]
    fn = counts.fn[tag]
    precision = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass
class TagMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    per_tag: dict[str, TagMetrics]
    precision: float
    recall: float
    f1: float
    accuracy: float


def weighted_average(counts: TagCounts) -> MetricsReport:
    """Support-weighted corpus metrics, excluding the outside tag from the
    averages. Raises EvaluationError when no non-outside token exists,
    because the average is undefined there."""
    per_tag: dict[str, TagMetrics] = {}
    for tag in counts.tags():
        p, r, f1 = precision_recall_f1(counts, tag)
        per_tag[tag] = TagMetrics(p, r, f1, counts.support(tag))
    entity_support = sum(
        m.support for tag, m in per_tag.items() if tag != OUTSIDE_TAG
    )
    if entity_support == 0:
        raise EvaluationError(
            "no tokens carry a non-outside tag; weighted metrics are undefined"
        )
    wp = wr = wf = 0.0
    for tag, m in per_tag.items():
        if tag == OUTSIDE_TAG:
            continue
        weight = m.support / entity_support
        wp += weight * m.precision
        wr += weight * m.recall
        wf += weight * m.f1
    total = counts.total_tokens()
    accuracy = 100.0 * sum(counts.tp.values()) / total if total else 0.0
    return MetricsReport(per_tag, wp, wr, wf, accuracy)


# ---------------------------------------------------------------------------
# Comparison rendering


def render_comparison_table(rows: list[tuple[str, MetricsReport]]) -> str:
    """Fixed-width text table of weighted metrics, one row per model, with
    the best F1 marked by an asterisk."""
    if not rows:
        raise EvaluationError("no rows to render")
    best = max(range(len(rows)), key=lambda i: rows[i][1].f1)
    name_w = max(len("Model"), max(len(name) + 2 for name, _ in rows))
    header = f"{'Model':<{name_w}}  {'Precision':>9}  {'Recall':>9}  {'F1-score':>9}"
    lines = [header, "-" * len(header)]
    for i, (name, rep) in enumerate(rows):
        label = f"{name} *" if i == best else name
        lines.append(
            f"{label:<{name_w}}  {rep.precision:>9.1f}  {rep.recall:>9.1f}  {rep.f1:>9.1f}"
        )
    lines.append("(* best F1)")
    return "\n".join(lines) + "\n"


def comparison_csv(rows: list[tuple[str, MetricsReport]]) -> str:
    """Machine-readable companion to the table, one decimal place."""
    if not rows:
        raise EvaluationError("no rows to render")
    lines = ["model,precision,recall,f1"]
    for name, rep in rows:
        lines.append(f"{name},{rep.precision:.1f},{rep.recall:.1f},{rep.f1:.1f}")
    return "\n".join(lines) + "\n"
