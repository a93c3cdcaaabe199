"""Cold-start data machinery: outcome-based rejection sampling, per-question
caps, category balancing, and masked SFT export.

Exported episodes are segment lists where only the policy-generated
thought/action text is trainable; prompt and observation segments never are.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .protocol import (
    PromptTemplates,
    Trajectory,
    build_prompt,
    render_policy_text,
    wrap_observation,
)
from .rewards import answer_set, normalize_answer

DATASET_SCHEMA_VERSION = 1
SFT_SCHEMA_VERSION = 1

PER_QUESTION_CAP = 3

SEGMENT_ROLES = ("prompt", "thought_action", "observation")


class DatasetError(ValueError):
    pass


class BalancingError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    question: str
    topic_entities: tuple[tuple[str, str], ...]
    golden_answers: tuple[str, ...]
    category: Optional[str] = None

    def __post_init__(self):
        if not self.golden_answers:
            raise DatasetError(f"record {self.id!r} has no golden answers")


def record_from_dict(payload: dict) -> DatasetRecord:
    return DatasetRecord(
        id=str(payload["id"]),
        question=payload["question"],
        topic_entities=tuple((m, i) for m, i in payload.get("topic_entities", [])),
        golden_answers=tuple(payload["golden_answers"]),
        category=payload.get("category"),
    )


def record_to_dict(record: DatasetRecord) -> dict:
    out = {
        "schema_version": DATASET_SCHEMA_VERSION,
        "id": record.id,
        "question": record.question,
        "topic_entities": [list(p) for p in record.topic_entities],
        "golden_answers": list(record.golden_answers),
    }
    if record.category is not None:
        out["category"] = record.category
    return out


def read_dataset(path) -> list[DatasetRecord]:
    records = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = record_from_dict(json.loads(line))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise DatasetError(f"{path}:{line_no}: bad dataset record: {exc}") from exc
            if record.id in seen_ids:
                raise DatasetError(f"{path}:{line_no}: duplicate record id {record.id!r}")
            seen_ids.add(record.id)
            records.append(record)
    return records


def write_dataset(records: Iterable[DatasetRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


# -- rejection sampling ----------------------------------------------------------


def em_hit(predicted: Iterable[str], gold: Iterable[str]) -> bool:
    """At least one predicted answer appears among the gold answers."""
    return bool(answer_set(predicted) & answer_set(gold))


def evidence_grounded(trajectory: Trajectory) -> bool:
    """Every predicted answer occurs (normalized) inside some observation."""
    if trajectory.final_answers is None:
        raise ValueError("trajectory has no final answers")
    haystacks = [obs.casefold() for obs in trajectory.observations()]
    return all(any(normalize_answer(a) in h for h in haystacks) for a in trajectory.final_answers)


def rejection_filter(
    candidates: Sequence[Trajectory],
    record: DatasetRecord,
    cap: int = PER_QUESTION_CAP,
) -> list[Trajectory]:
    """Keep correct, fully-grounded trajectories; cap per question, preferring
    fewer turns, then earlier generation order."""
    kept = [
        (len(t.turns), index, t)
        for index, t in enumerate(candidates)
        if t.final_answers is not None and em_hit(t.final_answers, record.golden_answers) and evidence_grounded(t)
    ]
    kept.sort(key=lambda item: (item[0], item[1]))
    return [t for _, _, t in kept[:cap]]


# -- category balancing ------------------------------------------------------------


@dataclass(frozen=True)
class BalanceResult:
    items: tuple[tuple[str, Trajectory], ...]  # (question id, trajectory)
    realized: dict[str, int]


def balance_dataset(
    kept: Mapping[str, Sequence[Trajectory]],
    categories: Mapping[str, str],
    targets: Mapping[str, int],
    seed: int,
) -> BalanceResult:
    """Seeded up/down-sampling to per-category trajectory count targets.

    Up-sampling duplicates whole trajectories; categories without a target
    pass through unchanged. Deterministic for a fixed seed.
    """
    pools: dict[str, list[tuple[str, Trajectory]]] = {}
    for qid in sorted(kept):
        if qid not in categories:
            raise BalancingError(f"question {qid!r} has no category label")
        pools.setdefault(categories[qid], []).extend((qid, t) for t in kept[qid])

    items: list[tuple[str, Trajectory]] = []
    realized: dict[str, int] = {}
    for category in sorted(set(pools) | set(targets)):
        pool = pools.get(category, [])
        target = targets.get(category)
        if target is None:
            chosen = pool
        elif not pool:
            if target > 0:
                raise BalancingError(f"category {category!r} has no kept trajectories but target {target}")
            chosen = []
        elif len(pool) > target:
            rng = random.Random(f"{seed}:{category}")
            picked = sorted(rng.sample(range(len(pool)), target))
            chosen = [pool[i] for i in picked]
        elif len(pool) < target:
            rng = random.Random(f"{seed}:{category}")
            chosen = pool + [pool[rng.randrange(len(pool))] for _ in range(target - len(pool))]
        else:
            chosen = pool
        realized[category] = len(chosen)
        items.extend(chosen)
    return BalanceResult(tuple(items), realized)


# -- masked SFT export ---------------------------------------------------------------


@dataclass(frozen=True)
class SftSegment:
    role: str
    text: str
    train: bool

    def __post_init__(self):
        if self.role not in SEGMENT_ROLES:
            raise ValueError(f"bad segment role {self.role!r}")
        if self.train != (self.role == "thought_action"):
            raise ValueError("train mask must mark exactly the thought_action segments")


@dataclass(frozen=True)
class SftExample:
    segments: tuple[SftSegment, ...]

    @property
    def text(self) -> str:
        return "".join(s.text for s in self.segments)


def render_episode_segments(trajectory: Trajectory, templates: Optional[PromptTemplates] = None) -> SftExample:
    """Deterministic episode rendering: two untrainable prompt segments, then a
    trainable thought/action segment and an untrainable wrapped observation per
    turn; final-answer turns leave no trailing observation."""
    prompt = build_prompt(trajectory.question, trajectory.topic_entities, templates)
    segments = [
        SftSegment("prompt", prompt.system_text + "\n\n", False),
        SftSegment("prompt", prompt.user_text + "\n", False),
    ]
    for turn in trajectory.turns:
        segments.append(SftSegment("thought_action", render_policy_text(turn), True))
        if turn.observation is not None:
            segments.append(SftSegment("observation", "\n" + wrap_observation(turn.observation) + "\n", False))
    return SftExample(tuple(segments))


def export_sft(trajectories: Iterable[Trajectory], templates: Optional[PromptTemplates] = None) -> list[SftExample]:
    return [render_episode_segments(t, templates) for t in trajectories]


def write_sft_examples(examples: Iterable[SftExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for example in examples:
            payload = {
                "schema_version": SFT_SCHEMA_VERSION,
                "segments": [{"role": s.role, "text": s.text, "train": s.train} for s in example.segments],
            }
            fh.write(json.dumps(payload, ensure_ascii=False) + "\n")


def read_sft_examples(path) -> list[SftExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                payload = json.loads(line)
                out.append(
                    SftExample(tuple(SftSegment(s["role"], s["text"], s["train"]) for s in payload["segments"]))
                )
    return out
