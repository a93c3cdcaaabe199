"""Episode and group execution: the decide → parse → dispatch → observe loop.

Tool failures never abort an episode (diagnostics become observations) and a
malformed policy output consumes a step, so trajectories always record what
actually happened, in order.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .kb import KnowledgeBase
from .policy import PolicyError
from .protocol import (
    InvalidAction,
    ParseFailure,
    PromptTemplates,
    ThoughtAnswer,
    Trajectory,
    Turn,
    build_prompt,
    parse_model_output,
    render_policy_text,
)
from .sparql import EvalLimits
from .tools import execute_sparql, search_graph_patterns, search_types

TRUNCATION_SUFFIX = "[truncated]"


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 10
    eval_limits: EvalLimits = field(default_factory=EvalLimits)
    observation_char_cap: int = 2000
    group_size: int = 8
    # Episode-total cap on policy-generated characters (no tokenizer in scope);
    # None = unlimited.
    max_response_chars: Optional[int] = None

    def __post_init__(self):
        if self.max_steps < 1 or self.observation_char_cap < 1:
            raise ValueError("max_steps and observation_char_cap must be positive")
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2 (group statistics need N >= 2)")
        if self.max_response_chars is not None and self.max_response_chars < 1:
            raise ValueError("max_response_chars must be positive when set")


def dispatch_tool(action, kb: KnowledgeBase, limits: EvalLimits, scorer=None) -> str:
    if action.tool == "SearchTypes":
        ranked = search_types(kb, action.arguments["query"], scorer=scorer)
        return "[" + ", ".join(json.dumps(name, ensure_ascii=False) for name, _ in ranked) + "]"
    if action.tool == "SearchGraphPatterns":
        return search_graph_patterns(
            kb,
            action.arguments["sparql"],
            action.arguments.get("semantic"),
            limits,
            scorer=scorer,
        )
    return execute_sparql(kb, action.arguments["sparql"], limits)


def truncate_observation(observation: str, cap: int) -> str:
    if len(observation) <= cap:
        return observation
    return observation[:cap] + TRUNCATION_SUFFIX


def run_episode(
    question: str,
    topic_entities: Sequence[tuple[str, str]],
    policy,
    kb: KnowledgeBase,
    config: EpisodeConfig = EpisodeConfig(),
    templates: Optional[PromptTemplates] = None,
    scorer=None,
    question_id: Optional[str] = None,
) -> Trajectory:
    prompt = build_prompt(question, topic_entities, templates)
    entities = tuple((m, i) for m, i in topic_entities)
    turns: list[Turn] = []
    final_answers = None
    terminated_by = "max_steps"
    response_chars = 0
    while len(turns) < config.max_steps:
        if config.max_response_chars is not None and response_chars >= config.max_response_chars:
            break
        state = Trajectory(question, entities, tuple(turns), question_id=question_id)
        try:
            output = policy.decide(prompt, state)
        except PolicyError:
            terminated_by = "policy_failure"
            break
        response_chars += len(output.text)
        parsed = parse_model_output(output.text)
        if isinstance(parsed, ParseFailure):
            turns.append(
                Turn(
                    thought=parsed.thought,
                    invalid=InvalidAction(parsed.reason, parsed.message, output.text),
                    observation=parsed.observation(),
                )
            )
            continue
        if isinstance(parsed, ThoughtAnswer):
            turns.append(Turn(thought=parsed.thought, final_answer=parsed.answers))
            final_answers = parsed.answers
            terminated_by = "answer"
            break
        observation = truncate_observation(
            dispatch_tool(parsed.action, kb, config.eval_limits, scorer), config.observation_char_cap
        )
        turns.append(Turn(thought=parsed.thought, action=parsed.action, observation=observation))
    return Trajectory(question, entities, tuple(turns), final_answers, terminated_by, question_id)


def run_group(
    question: str,
    topic_entities: Sequence[tuple[str, str]],
    policy,
    kb: KnowledgeBase,
    config: EpisodeConfig = EpisodeConfig(),
    templates: Optional[PromptTemplates] = None,
    scorer=None,
    question_id: Optional[str] = None,
    parallelism: int = 1,
) -> list[Trajectory]:
    """N independent episodes in deterministic index order; failures stay
    per-trajectory and never abort siblings."""

    def one(_: int) -> Trajectory:
        return run_episode(question, topic_entities, policy, kb, config, templates, scorer, question_id)

    if parallelism <= 1:
        return [one(i) for i in range(config.group_size)]
    with ThreadPoolExecutor(max_workers=min(parallelism, config.group_size)) as pool:
        return list(pool.map(one, range(config.group_size)))


# -- run manifest ---------------------------------------------------------------


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def episode_stats(trajectory: Trajectory) -> dict:
    response_chars = sum(len(render_policy_text(t)) for t in trajectory.turns)
    invalid_calls = sum(1 for t in trajectory.turns if t.invalid is not None)
    invalid_calls += sum(
        1
        for t in trajectory.turns
        if t.observation is not None
        and (t.observation.startswith("SPARQL parse error") or t.observation.startswith("SPARQL evaluation error"))
    )
    return {
        "turns": len(trajectory.turns),
        "response_chars": response_chars,
        "invalid_calls": invalid_calls,
        "terminated_by": trajectory.terminated_by,
    }


def build_manifest(
    config_snapshot: dict,
    kb_path,
    dataset_path,
    episodes: list[dict],
    seed: Optional[int] = None,
    created: Optional[float] = None,
) -> dict:
    return {
        "schema_version": 1,
        "created_unix": time.time() if created is None else created,
        "kb_path": str(kb_path),
        "kb_sha256": file_sha256(kb_path),
        "dataset_path": str(dataset_path) if dataset_path else None,
        "dataset_sha256": file_sha256(dataset_path) if dataset_path else None,
        "seed": seed,
        "config": config_snapshot,
        "episodes": episodes,
    }
