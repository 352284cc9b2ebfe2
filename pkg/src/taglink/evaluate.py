"""Candidate recall, multiclass selection metrics, end-to-end error analysis and the
BM25 threshold baseline."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .candgen import CandidateSet
from .selector.core import LinkDecision

NO_MATCH_LABEL = "<no-match>"
_F1_EPS = 1e-12
CLASS_CONVENTION = (
    "macro averages run over every class seen in truth or predictions, "
    "including no-match when it occurs; 0/0 counts as 0"
)


@dataclass(frozen=True)
class RecallReport:
    k: int | None
    hits: int
    total: int
    excluded: int = 0

    @property
    def recall(self) -> float:
        return self.hits / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {"k": self.k, "recall": self.recall, "hits": self.hits, "total": self.total,
                "excluded": self.excluded}


def recall_at_k(candidate_sets: Iterable[CandidateSet], truth: Mapping[str, str | None],
                k: int | None = None) -> RecallReport:
    """Share of linked tags whose true actor is among the first ``k`` candidates.

    Tags with no ground-truth actor are left out and counted in ``excluded``.
    """
    hits = total = excluded = 0
    for cs in candidate_sets:
        actor = truth.get(cs.tag_id)
        if actor is None:
            excluded += 1
            continue
        total += 1
        ids = cs.actor_ids if k is None else cs.actor_ids[:k]
        hits += actor in ids
    return RecallReport(k, hits, total, excluded)


def recall_curve(candidate_sets: Sequence[CandidateSet], truth: Mapping[str, str | None],
                 ks: Iterable[int] = (1, 5, 10, 25)) -> list[RecallReport]:
    return [recall_at_k(candidate_sets, truth, k) for k in ks]


@dataclass
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass
class MulticlassReport:
    n: int
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: dict[str, ClassCounts] = field(default_factory=dict)

    def to_dict(self, with_classes: bool = True) -> dict:
        out = {
            "n": self.n,
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "classes": len(self.per_class),
        }
        if with_classes:
            out["per_class"] = {
                label: {"tp": c.tp, "fp": c.fp, "fn": c.fn, "precision": c.precision,
                        "recall": c.recall, "f1": c.f1}
                for label, c in sorted(self.per_class.items())
            }
        return out


def _label(actor: str | None) -> str:
    return NO_MATCH_LABEL if actor is None else actor


def classification_report(y_true: Sequence[str | None], y_pred: Sequence[str | None]) -> MulticlassReport:
    """Accuracy and macro P/R/F1 with ``None`` standing for no-match.

    Macro sums are exactly rounded, so the result does not depend on the order
    in which classes were first seen.
    """
    if len(y_true) != len(y_pred):
        raise ValueError("truth and predictions differ in length")
    counts: dict[str, ClassCounts] = {}
    correct = 0
    for t, p in zip(y_true, y_pred):
        lt, lp = _label(t), _label(p)
        ct = counts.setdefault(lt, ClassCounts())
        cp = counts.setdefault(lp, ClassCounts())
        if lt == lp:
            correct += 1
            ct.tp += 1
        else:
            ct.fn += 1
            cp.fp += 1
    n = len(y_true)
    m = len(counts)
    if not m:
        return MulticlassReport(0, 0.0, 0.0, 0.0, 0.0, {})
    return MulticlassReport(
        n=n,
        accuracy=correct / n,
        macro_precision=math.fsum(c.precision for c in counts.values()) / m,
        macro_recall=math.fsum(c.recall for c in counts.values()) / m,
        macro_f1=math.fsum(c.f1 for c in counts.values()) / m,
        per_class=counts,
    )


def _aligned(decisions: Sequence[LinkDecision], truth: Mapping[str, str | None]):
    missing = [d.tag_id for d in decisions if d.tag_id not in truth]
    if missing:
        raise KeyError(f"no ground truth for {len(missing)} tag(s), e.g. {missing[0]!r}")
    return [truth[d.tag_id] for d in decisions], [d.predicted for d in decisions]


def multiclass_metrics(decisions: Sequence[LinkDecision], truth: Mapping[str, str | None]) -> MulticlassReport:
    y_true, y_pred = _aligned(decisions, truth)
    return classification_report(y_true, y_pred)


@dataclass
class ErrorBreakdown:
    correct: int = 0
    missed_entity: int = 0
    wrong_entity: int = 0
    generator_misses: int = 0
    # true actor -> [misclassified, occurrences]
    per_actor: dict[str, list[int]] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.correct + self.missed_entity + self.wrong_entity

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "missed_entity": self.missed_entity,
            "wrong_entity": self.wrong_entity,
            "generator_misses": self.generator_misses,
        }


def error_breakdown(y_true: Sequence[str | None], y_pred: Sequence[str | None]) -> ErrorBreakdown:
    eb = ErrorBreakdown()
    for t, p in zip(y_true, y_pred):
        if t is not None:
            tally = eb.per_actor.setdefault(t, [0, 0])
            tally[1] += 1
        if t == p:
            eb.correct += 1
            continue
        if t is not None:
            eb.per_actor[t][0] += 1
        if p is None:
            eb.missed_entity += 1
        else:
            eb.wrong_entity += 1
    return eb


def end_to_end_metrics(candidate_sets: Sequence[CandidateSet], decisions: Sequence[LinkDecision],
                       truth: Mapping[str, str | None]) -> tuple[MulticlassReport, ErrorBreakdown]:
    """Metrics over the whole pipeline, where a generator miss can never be correct."""
    by_tag = {cs.tag_id: cs for cs in candidate_sets}
    y_true, y_pred = _aligned(decisions, truth)
    misses = 0
    for d, t in zip(decisions, y_true):
        cs = by_tag.get(d.tag_id)
        if cs is None:
            raise KeyError(f"no candidate set for tag {d.tag_id!r}")
        if d.predicted is not None and d.predicted not in cs.actor_ids:
            raise ValueError(f"tag {d.tag_id!r}: prediction {d.predicted!r} is not a candidate")
        if t is not None and t not in cs.actor_ids:
            misses += 1
    breakdown = error_breakdown(y_true, y_pred)
    breakdown.generator_misses = misses
    return classification_report(y_true, y_pred), breakdown


def bm25_threshold_baseline(candidate_sets: Iterable[CandidateSet], threshold: float) -> list[LinkDecision]:
    """Link to the top candidate when its score reaches the threshold."""
    out = []
    for cs in candidate_sets:
        if cs.candidates and cs.candidates[0].score >= threshold:
            top = cs.candidates[0]
            out.append(LinkDecision(cs.tag_id, top.actor_id, f"{top.score:.6f}"))
        else:
            score = f"{cs.candidates[0].score:.6f}" if cs.candidates else ""
            out.append(LinkDecision(cs.tag_id, None, score))
    return out


def tune_threshold(candidate_sets: Sequence[CandidateSet], truth: Mapping[str, str | None]) -> float:
    """Observed top score maximizing the baseline's macro F1; ties go to the larger score."""
    sets = [cs for cs in candidate_sets if cs.tag_id in truth]
    if not sets:
        raise ValueError("no scored candidate sets with ground truth")
    thresholds = sorted({cs.candidates[0].score for cs in sets if cs.candidates}, reverse=True)
    if not thresholds:
        raise ValueError("no candidate set has a scored top candidate")
    y_true = [truth[cs.tag_id] for cs in sets]
    best_t, best_f1 = thresholds[0], -1.0
    for t in thresholds:
        y_pred = [cs.candidates[0].actor_id if cs.candidates and cs.candidates[0].score >= t else None
                  for cs in sets]
        f1 = classification_report(y_true, y_pred).macro_f1
        if f1 > best_f1 + _F1_EPS:  # summation-order noise must not break the tie rule
            best_t, best_f1 = t, f1
    return best_t


def top_misclassified_actors(breakdown: ErrorBreakdown, n: int = 3) -> list[tuple[str, int, int]]:
    rows = [(a, miss, total) for a, (miss, total) in breakdown.per_actor.items() if miss > 0]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows[:n]


def decision_stats(decisions: Sequence[LinkDecision]) -> dict:
    c = Counter()
    for d in decisions:
        c["total"] += 1
        c["no_match"] += d.predicted is None
        c["invalid_response"] += (not d.valid_response) and not d.failed
        c["failed"] += d.failed
    return {k: c[k] for k in ("total", "no_match", "invalid_response", "failed")}
