"""Per-question evaluation metrics (F1, EM, RHits@1) and report aggregation."""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Optional, Sequence

from .rewards import answer_set, f_beta, normalize_answer

METRIC_NAMES = ("f1", "em", "rhits1")


def f1(predicted: Iterable[str], gold: Iterable[str]) -> float:
    return f_beta(predicted, gold, 1.0)


def em(predicted: Iterable[str], gold: Iterable[str], strict: bool = False) -> float:
    """At-least-one-hit indicator by default; strict mode demands set equality."""
    gold_set = answer_set(gold)
    if not gold_set:
        raise ValueError("gold answer set must be non-empty")
    pred_set = answer_set(predicted)
    if strict:
        return 1.0 if pred_set == gold_set else 0.0
    return 1.0 if pred_set & gold_set else 0.0


def _dedup_normalized(predicted: Iterable[str]) -> list[str]:
    out = []
    for p in predicted:
        norm = normalize_answer(p)
        if norm not in out:
            out.append(norm)
    return out


def rhits1(
    predicted: Sequence[str],
    gold: Iterable[str],
    mode: str = "expectation",
    seed: int = 0,
) -> float:
    """Hit rate of one uniformly-sampled predicted answer.

    Expectation mode returns the exact expected value; sampled mode draws a
    single answer with the given seed for legacy comparability.
    """
    gold_set = answer_set(gold)
    if not gold_set:
        raise ValueError("gold answer set must be non-empty")
    pool = _dedup_normalized(predicted)
    if not pool:
        return 0.0
    if mode == "expectation":
        return len([p for p in pool if p in gold_set]) / len(pool)
    if mode == "sampled":
        pick = pool[random.Random(seed).randrange(len(pool))]
        return 1.0 if pick in gold_set else 0.0
    raise ValueError(f"unknown rhits1 mode {mode!r}")


@dataclass(frozen=True)
class QuestionResult:
    id: str
    predicted: tuple[str, ...]
    gold: tuple[str, ...]
    category: Optional[str]
    f1: float
    em: float
    rhits1: float


def score_question(
    qid: str,
    predicted: Sequence[str],
    gold: Sequence[str],
    category: Optional[str] = None,
    rhits_mode: str = "expectation",
    seed: int = 0,
) -> QuestionResult:
    return QuestionResult(
        id=qid,
        predicted=tuple(predicted),
        gold=tuple(gold),
        category=category,
        f1=f1(predicted, gold),
        em=em(predicted, gold),
        rhits1=rhits1(predicted, gold, rhits_mode, seed),
    )


@dataclass(frozen=True)
class MetricsReport:
    overall: dict[str, float]
    per_category: dict[str, dict[str, float]]
    n: dict[str, int]

    def to_dict(self) -> dict:
        return {"overall": self.overall, "per_category": self.per_category, "n": self.n}


def aggregate(results: Sequence[QuestionResult]) -> MetricsReport:
    """Unweighted means overall and per category; uncategorized questions
    contribute to overall only."""

    def means(group: Sequence[QuestionResult]) -> dict[str, float]:
        return {name: fmean(getattr(r, name) for r in group) for name in METRIC_NAMES}

    overall = means(results) if results else {name: 0.0 for name in METRIC_NAMES}
    per_category: dict[str, dict[str, float]] = {}
    counts: dict[str, int] = {"overall": len(results)}
    for category in sorted({r.category for r in results if r.category is not None}):
        group = [r for r in results if r.category == category]
        per_category[category] = means(group)
        counts[category] = len(group)
    return MetricsReport(overall, per_category, counts)


def write_report_json(report: MetricsReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_per_question_csv(results: Sequence[QuestionResult], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "category", "f1", "em", "rhits1"])
        for r in results:
            writer.writerow([r.id, r.category or "", f"{r.f1:.6f}", f"{r.em:.6f}", f"{r.rhits1:.6f}"])
