"""Composite outcome reward: format reward, F-beta answer reward with a
two-phase beta curriculum, capped total, and the optional process penalties
(hallucinated schema identifiers, query timeouts).

Answer strings match under trim + Unicode case-fold, with no alias expansion;
the same rule is shared by the data pipeline and the evaluation metrics.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .protocol import PromptTemplates, Trajectory, build_prompt

TIMEOUT_OBSERVATION_PREFIX = "SPARQL timeout after"

# Dotted schema identifiers: >=2 dot-separated segments, first starting with a
# letter, so bare numbers and entity-free text never match.
SCHEMA_ID_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*(?:\.[A-Za-z0-9_]+)+")

ENTITY_ID_PREFIXES = ("m.", "g.")


def normalize_answer(text: str) -> str:
    return text.strip().casefold()


def answer_set(answers: Iterable[str]) -> set[str]:
    return {normalize_answer(a) for a in answers}


def f_beta(predicted: Iterable[str], gold: Iterable[str], beta: float) -> float:
    """Weighted harmonic mean of precision and recall over de-duplicated,
    normalized answer sets; 0.0 on empty or disjoint predictions."""
    if beta <= 0:
        raise ValueError("beta must be > 0")
    gold_set = answer_set(gold)
    if not gold_set:
        raise ValueError("gold answer set must be non-empty")
    pred_set = answer_set(predicted)
    hits = len(pred_set & gold_set)
    if not pred_set or hits == 0:
        return 0.0
    precision = hits / len(pred_set)
    recall = hits / len(gold_set)
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


def em_indicator(predicted: Iterable[str], gold: Iterable[str]) -> float:
    gold_set = answer_set(gold)
    if not gold_set:
        raise ValueError("gold answer set must be non-empty")
    return 1.0 if answer_set(predicted) & gold_set else 0.0


@dataclass(frozen=True)
class RewardPhase:
    name: str
    beta: float
    start: int
    end: Optional[int]  # inclusive; None = open-ended

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("phase beta must be > 0")
        if self.start < 0 or (self.end is not None and self.end < self.start):
            raise ValueError("bad phase step range")

    def contains(self, step: int) -> bool:
        return step >= self.start and (self.end is None or step <= self.end)


@dataclass(frozen=True)
class PenaltyConfig:
    per_event: float = -0.2
    floor: float = -0.5
    hallucination_enabled: bool = True
    timeout_enabled: bool = True
    seed_history_with_prompt: bool = True

    def __post_init__(self):
        if self.per_event > 0 or self.floor > 0:
            raise ValueError("penalties must be <= 0")


def default_phases(total_steps: int = 1000) -> tuple[RewardPhase, ...]:
    """Precision-leaning beta=0.5 for the first 60% of steps, then F1."""
    boundary = max(1, math.ceil(total_steps * 0.6))
    return (
        RewardPhase("phase1", 0.5, 0, boundary - 1),
        RewardPhase("phase2", 1.0, boundary, None),
    )


@dataclass(frozen=True)
class RewardConfig:
    format_reward_value: float = 0.1
    phases: tuple[RewardPhase, ...] = default_phases()
    cap: float = 1.0
    penalties: Optional[PenaltyConfig] = None
    answer_mode: str = "f_beta"  # f_beta | em

    def __post_init__(self):
        if not self.phases:
            raise ValueError("at least one reward phase required")
        if self.phases[0].start != 0:
            raise ValueError("first phase must start at step 0")
        for prev, nxt in zip(self.phases, self.phases[1:]):
            if prev.end is None or nxt.start != prev.end + 1:
                raise ValueError("phase step ranges must be contiguous and non-overlapping")
        if self.answer_mode not in ("f_beta", "em"):
            raise ValueError(f"unknown answer_mode {self.answer_mode!r}")

    def phase_at(self, global_step: int) -> RewardPhase:
        for phase in self.phases:
            if phase.contains(global_step):
                return phase
        raise ValueError(f"no phase covers step {global_step}")


@dataclass(frozen=True)
class RewardBreakdown:
    r_fmt: float
    r_ans: float
    penalty: float
    total: float
    phase: str
    beta_used: float

    def to_dict(self) -> dict:
        return {
            "r_fmt": self.r_fmt,
            "r_ans": self.r_ans,
            "penalty": self.penalty,
            "total": self.total,
            "phase": self.phase,
            "beta_used": self.beta_used,
        }


def has_answer_box(trajectory: Trajectory) -> bool:
    """FinalAnswer turns exist only when a parseable \\boxed{} was produced."""
    return trajectory.terminated_by == "answer"


def format_reward(trajectory: Trajectory, value: float = 0.1) -> float:
    return value if has_answer_box(trajectory) else 0.0


def extract_schema_identifiers(text: str, type_predicate: str = "type.object.type") -> set[str]:
    """Dotted identifiers excluding entity ids (m.* / g.*) and the type predicate."""
    out = set()
    for token in SCHEMA_ID_RE.findall(text):
        if token.startswith(ENTITY_ID_PREFIXES) or token == type_predicate:
            continue
        out.add(token)
    return out


def count_hallucinations(
    trajectory: Trajectory,
    type_predicate: str = "type.object.type",
    seed_history_with_prompt: bool = True,
    templates: Optional[PromptTemplates] = None,
) -> int:
    """Tool calls referencing a schema identifier never seen in any earlier
    observation (nor, when seeded, the initial prompt)."""
    history: set[str] = set()
    if seed_history_with_prompt:
        prompt = build_prompt(trajectory.question, trajectory.topic_entities, templates)
        history |= set(SCHEMA_ID_RE.findall(prompt.system_text))
        history |= set(SCHEMA_ID_RE.findall(prompt.user_text))
    count = 0
    for turn in trajectory.turns:
        if turn.action is not None:
            call_text = "\n".join(turn.action.arguments.values())
            wanted = extract_schema_identifiers(call_text, type_predicate)
            if any(identifier not in history for identifier in wanted):
                count += 1
        if turn.observation is not None:
            history |= set(SCHEMA_ID_RE.findall(turn.observation))
    return count


def count_timeouts(trajectory: Trajectory) -> int:
    return sum(
        1 for t in trajectory.turns if t.observation is not None and t.observation.startswith(TIMEOUT_OBSERVATION_PREFIX)
    )


def process_penalty(trajectory: Trajectory, config: PenaltyConfig, templates: Optional[PromptTemplates] = None) -> float:
    events = 0
    if config.hallucination_enabled:
        events += count_hallucinations(
            trajectory, seed_history_with_prompt=config.seed_history_with_prompt, templates=templates
        )
    if config.timeout_enabled:
        events += count_timeouts(trajectory)
    return max(events * config.per_event, config.floor)


def total_reward(
    trajectory: Trajectory,
    gold: Sequence[str],
    config: RewardConfig = RewardConfig(),
    global_step: int = 0,
    templates: Optional[PromptTemplates] = None,
) -> RewardBreakdown:
    phase = config.phase_at(global_step)
    boxed = has_answer_box(trajectory)
    r_fmt = config.format_reward_value if boxed else 0.0
    if not boxed:
        r_ans = 0.0
    elif config.answer_mode == "em":
        r_ans = em_indicator(trajectory.final_answers, gold)
    else:
        r_ans = f_beta(trajectory.final_answers, gold, phase.beta)
    penalty = process_penalty(trajectory, config.penalties, templates) if config.penalties else 0.0
    total = min(r_fmt + r_ans, config.cap) + penalty
    return RewardBreakdown(r_fmt, r_ans, penalty, total, phase.name, phase.beta)
