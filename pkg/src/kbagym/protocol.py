"""ReAct trajectory data model, prompt assembly, and policy-output parsing.

The wire protocol lives here: `<think>` / `<tool_call>` / `<answer>` blocks,
the boxed answer-list syntax, the parse-failure observation string, and the
trajectory JSONL interchange format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

TOOL_REQUIRED_ARGUMENT = {
    "SearchTypes": "query",
    "SearchGraphPatterns": "sparql",
    "ExecuteSPARQL": "sparql",
}

TERMINATED_BY = ("answer", "max_steps", "policy_failure")

DEFAULT_SYSTEM_PROMPT = """#Tools

You are an expert in knowledge base query language SPARQL programming. The user gives a question, and you need to iteratively call the tool to continuously improve the SPARQL query until it can get the answer to the question.

You are provided with function signatures within <tools></tools> XML tags:
<tools>
{'type': 'function', 'function': {'name': 'SearchGraphPatterns', 'description': 'This tool searches for relevant one-hop and two-hop subgraphs tied to a specified variable. It queries subgraphs where the chosen variable (?x, assuming the SPARQL query begins with "SELECT DISTINCT ?x WHERE") appears as the head or tail entity and returns them collectively. The semantic parameter indicates the expected predicate semantics. When provided, the tool ranks the subgraphs based on these semantics. If unspecified, it returns the complete subgraph.', 'parameters': {'type': 'object', 'properties': {'sparql': {'type': 'string', 'description': 'SPARQL query'}, 'semantic': {'type': 'string', 'description': 'The semantic parameter represents the expected predicate semantics.'}}, 'required': ['sparql']}}}

{'type': 'function', 'function': {'name': 'ExecuteSPARQL', 'description': 'This tool executes a SPARQL query and returns the results.', 'parameters': {'type': 'object', 'properties': {'sparql': {'type': 'string', 'description': 'SPARQL query'}}, 'required': ['sparql']}}}

{'type': 'function', 'function': {'name': 'SearchTypes', 'description': 'Search the knowledge base for matching semantic types, used to initiate queries from a type when no topic entities are available, or to find a type to refine the query when multiple entities are returned. When use the type, please give the sparql as: SELECT DISTINCT ?x WHERE { ?x ns:type.object.type ns:<type_name> }', 'parameters': {'type': 'object', 'properties': {'query': {'type': 'string', 'description': 'the semantic of type to search for'}}, 'required': ['query']}}}
</tools>

For each function call, return a json object with function name and arguments within <tool_call></tool_call> XML tags:
<tool_call>
{"name": <function-name>, "arguments": <args-json-object>}
</tool_call>"""

DEFAULT_USER_TEMPLATE = """When you encounter a complex question, you should break it down into several sub-questions and answer them step by step. You can use the tools provided. You can use the tool as many times as you want.
You must first conduct reasoning inside <think>...</think>. If you need to use the tool, you can use the tool call <tool_call>...</tool_call> to call the tool after <think>...</think>.
When you have the final answer, you can output the answer in the python list format inside <answer> tag, such as: <answer> the answer is \\boxed{[...]} </answer>.

Output format for tool call:
<think>
...
</think>
<tool_call>
...
</tool_call>

Output format for answer:
<think>
...
</think>
<answer>
...
</answer>

Question: {question}
Topic Entities: {topic entities}
Assistant:"""

QUESTION_PLACEHOLDER = "{question}"
ENTITIES_PLACEHOLDER = "{topic entities}"

PARSE_FAILURE_OBSERVATION = "Invalid response format: {reason}. Please follow the required output format."


class TemplateError(ValueError):
    """A custom prompt template failed load-time validation."""


@dataclass(frozen=True)
class PromptTemplates:
    system_template: str = DEFAULT_SYSTEM_PROMPT
    user_template: str = DEFAULT_USER_TEMPLATE

    def __post_init__(self):
        for placeholder in (QUESTION_PLACEHOLDER, ENTITIES_PLACEHOLDER):
            n = self.user_template.count(placeholder)
            if n != 1:
                raise TemplateError(f"user template must contain {placeholder} exactly once, found {n}")

    @classmethod
    def from_file(cls, path) -> "PromptTemplates":
        payload = json.loads(open(path, encoding="utf-8").read())
        return cls(
            payload.get("system_template", DEFAULT_SYSTEM_PROMPT),
            payload.get("user_template", DEFAULT_USER_TEMPLATE),
        )


@dataclass(frozen=True)
class PromptBundle:
    """Rendered episode prompt; turn messages are derived from the trajectory
    at request-rendering time rather than stored."""

    system_text: str
    user_text: str


def render_topic_entities(topic_entities: Sequence[tuple[str, str]]) -> str:
    return ", ".join(f"{mention} ({entity_iri})" for mention, entity_iri in topic_entities)


def build_prompt(
    question: str,
    topic_entities: Sequence[tuple[str, str]] = (),
    templates: Optional[PromptTemplates] = None,
) -> PromptBundle:
    """Substitute the two placeholders; substitution is a literal single-pass
    splice so values containing braces or placeholders cannot re-expand."""
    templates = templates or PromptTemplates()
    values = {
        QUESTION_PLACEHOLDER: question,
        ENTITIES_PLACEHOLDER: render_topic_entities(topic_entities),
    }
    text = templates.user_template
    spans = sorted((text.index(ph), ph) for ph in values)
    out = []
    cursor = 0
    for start, ph in spans:
        out.append(text[cursor:start])
        out.append(values[ph])
        cursor = start + len(ph)
    out.append(text[cursor:])
    return PromptBundle(templates.system_template, "".join(out))


# -- policy output parsing -----------------------------------------------------


@dataclass(frozen=True)
class Action:
    tool: str
    arguments: dict[str, str]

    def __post_init__(self):
        if self.tool not in TOOL_REQUIRED_ARGUMENT:
            raise ValueError(f"unknown tool {self.tool!r}")
        required = TOOL_REQUIRED_ARGUMENT[self.tool]
        if required not in self.arguments:
            raise ValueError(f"{self.tool} requires argument {required!r}")


@dataclass(frozen=True)
class InvalidAction:
    """An unparseable policy output, retained verbatim."""

    reason: str
    message: str
    raw: str


@dataclass(frozen=True)
class ThoughtAction:
    thought: str
    action: Action


@dataclass(frozen=True)
class ThoughtAnswer:
    thought: str
    answers: tuple[str, ...]


@dataclass(frozen=True)
class ParseFailure:
    reason: str
    message: str
    thought: str = ""

    def observation(self) -> str:
        return PARSE_FAILURE_OBSERVATION.format(reason=self.message)


def _first_block(text: str, tag: str) -> Optional[tuple[str, int, int]]:
    open_tag, close_tag = f"<{tag}>", f"</{tag}>"
    start = text.find(open_tag)
    if start < 0:
        return None
    end = text.find(close_tag, start + len(open_tag))
    if end < 0:
        return None
    return text[start + len(open_tag) : end], start, end + len(close_tag)


def extract_boxed_answers(text: str) -> tuple[list[str], bool]:
    """First \\boxed{...} parsed as an answer list.

    Returns (answers, box_found); brace matching skips braces inside quoted
    strings, and answers are trimmed and de-duplicated preserving order.
    """
    marker = "\\boxed{"
    start = text.find(marker)
    if start < 0:
        return [], False
    i = start + len(marker)
    depth = 1
    quote = None
    escaped = False
    chars = []
    while i < len(text):
        c = text[i]
        if escaped:
            chars.append(c)
            escaped = False
        elif c == "\\":
            chars.append(c)
            escaped = True
        elif quote is not None:
            chars.append(c)
            if c == quote:
                quote = None
        elif c in "'\"":
            chars.append(c)
            quote = c
        elif c == "{":
            depth += 1
            chars.append(c)
        elif c == "}":
            depth -= 1
            if depth == 0:
                break
            chars.append(c)
        else:
            chars.append(c)
        i += 1
    if depth != 0:
        return [], False
    interior = "".join(chars).strip()
    if interior.startswith("[") and interior.endswith("]"):
        interior = interior[1:-1]
    answers = []
    for item in _split_top_level(interior):
        value = _unquote(item.strip())
        if value and value not in answers:
            answers.append(value)
    return answers, True


def _split_top_level(text: str) -> list[str]:
    parts = []
    current = []
    quote = None
    escaped = False
    for c in text:
        if escaped:
            current.append(c)
            escaped = False
        elif c == "\\":
            current.append(c)
            escaped = True
        elif quote is not None:
            current.append(c)
            if c == quote:
                quote = None
        elif c in "'\"":
            current.append(c)
            quote = c
        elif c == ",":
            parts.append("".join(current))
            current = []
        else:
            current.append(c)
    parts.append("".join(current))
    return parts


def _unquote(item: str) -> str:
    if len(item) >= 2 and item[0] == item[-1] and item[0] in "'\"":
        body = item[1:-1]
        out = []
        i = 0
        while i < len(body):
            if body[i] == "\\" and i + 1 < len(body):
                out.append(body[i + 1])
                i += 2
            else:
                out.append(body[i])
                i += 1
        return "".join(out).strip()
    return item


def parse_model_output(text: str) -> Union[ThoughtAction, ThoughtAnswer, ParseFailure]:
    """Total parser for raw policy output; never raises.

    The first <think> block is the thought; then the earliest of the first
    <tool_call> or <answer> block after it decides the action.
    """
    if not isinstance(text, str):
        return ParseFailure("not-text", "output is not text")
    think = _first_block(text, "think")
    if think is None:
        return ParseFailure("missing-think", "missing <think>...</think> block")
    thought = think[0].strip()
    rest = text[think[2] :]
    call = _first_block(rest, "tool_call")
    answer = _first_block(rest, "answer")
    if call is not None and (answer is None or call[1] <= answer[1]):
        try:
            payload = json.loads(call[0].strip())
        except json.JSONDecodeError:
            return ParseFailure("bad-json", "tool_call is not valid JSON", thought)
        if not isinstance(payload, dict) or not isinstance(payload.get("name"), str):
            return ParseFailure("bad-json", "tool_call must be an object with a name", thought)
        name = payload["name"]
        if name not in TOOL_REQUIRED_ARGUMENT:
            return ParseFailure("unknown-tool", f"unknown tool {name!r}", thought)
        raw_args = payload.get("arguments", {})
        if not isinstance(raw_args, dict):
            return ParseFailure("bad-arguments", "arguments must be a JSON object", thought)
        arguments = {}
        for key, value in raw_args.items():
            if isinstance(value, str):
                arguments[str(key)] = value
            elif isinstance(value, (int, float, bool)) or value is None:
                arguments[str(key)] = json.dumps(value)
            else:
                return ParseFailure("bad-arguments", f"argument {key!r} must be a scalar", thought)
        required = TOOL_REQUIRED_ARGUMENT[name]
        if required not in arguments:
            return ParseFailure("missing-argument", f"{name} requires argument {required!r}", thought)
        return ThoughtAction(thought, Action(name, arguments))
    if answer is not None:
        answers, found = extract_boxed_answers(answer[0])
        if not found:
            return ParseFailure("no-box", "answer block contains no \\boxed{...} list", thought)
        return ThoughtAnswer(thought, tuple(answers))
    return ParseFailure("missing-block", "expected a <tool_call> or <answer> block", thought)


# -- trajectory model ----------------------------------------------------------


@dataclass(frozen=True)
class Turn:
    thought: str
    action: Optional[Action] = None
    final_answer: Optional[tuple[str, ...]] = None
    invalid: Optional[InvalidAction] = None
    observation: Optional[str] = None

    def __post_init__(self):
        kinds = sum(x is not None for x in (self.action, self.final_answer, self.invalid))
        if kinds != 1:
            raise ValueError("turn must hold exactly one of action / final_answer / invalid")
        if self.final_answer is not None and self.observation is not None:
            raise ValueError("final-answer turns carry no observation")


@dataclass(frozen=True)
class Trajectory:
    question: str
    topic_entities: tuple[tuple[str, str], ...] = ()
    turns: tuple[Turn, ...] = ()
    final_answers: Optional[tuple[str, ...]] = None
    terminated_by: str = "running"
    question_id: Optional[str] = None

    def __post_init__(self):
        if self.terminated_by not in TERMINATED_BY + ("running",):
            raise ValueError(f"bad terminated_by {self.terminated_by!r}")
        if (self.final_answers is not None) != (self.terminated_by == "answer"):
            raise ValueError("final_answers present iff terminated_by == 'answer'")

    @property
    def key(self) -> str:
        return self.question_id if self.question_id is not None else self.question

    def observations(self) -> list[str]:
        return [t.observation for t in self.turns if t.observation is not None]


def render_tool_call(action: Action) -> str:
    return json.dumps({"name": action.tool, "arguments": action.arguments}, ensure_ascii=False)


def render_boxed_answers(answers: Iterable[str]) -> str:
    inner = ", ".join(json.dumps(a, ensure_ascii=False) for a in answers)
    return "\\boxed{[" + inner + "]}"


def render_policy_text(turn: Turn) -> str:
    """Canonical policy-output text for a turn; invalid turns keep raw bytes."""
    if turn.invalid is not None:
        return turn.invalid.raw
    if turn.action is not None:
        return f"<think>\n{turn.thought}\n</think>\n<tool_call>\n{render_tool_call(turn.action)}\n</tool_call>"
    return f"<think>\n{turn.thought}\n</think>\n<answer>\nthe answer is {render_boxed_answers(turn.final_answer)}\n</answer>"


def wrap_observation(observation: str) -> str:
    return f"<tool_response>\n{observation}\n</tool_response>"


# -- JSONL persistence ----------------------------------------------------------


def turn_to_dict(turn: Turn) -> dict:
    out: dict = {"thought": turn.thought}
    if turn.action is not None:
        out["action"] = {"tool": turn.action.tool, "arguments": dict(turn.action.arguments)}
    elif turn.final_answer is not None:
        out["final_answer"] = list(turn.final_answer)
    else:
        out["invalid_action"] = {
            "reason": turn.invalid.reason,
            "message": turn.invalid.message,
            "raw": turn.invalid.raw,
        }
    if turn.observation is not None:
        out["observation"] = turn.observation
    return out


def turn_from_dict(payload: dict) -> Turn:
    action = None
    final_answer = None
    invalid = None
    if "action" in payload:
        action = Action(payload["action"]["tool"], dict(payload["action"]["arguments"]))
    elif "final_answer" in payload:
        final_answer = tuple(payload["final_answer"])
    elif "invalid_action" in payload:
        inv = payload["invalid_action"]
        invalid = InvalidAction(inv["reason"], inv.get("message", ""), inv.get("raw", ""))
    return Turn(
        thought=payload.get("thought", ""),
        action=action,
        final_answer=final_answer,
        invalid=invalid,
        observation=payload.get("observation"),
    )


def trajectory_to_dict(traj: Trajectory) -> dict:
    if traj.terminated_by == "running":
        raise ValueError("cannot serialize an in-flight trajectory")
    out = {
        "question": traj.question,
        "topic_entities": [list(pair) for pair in traj.topic_entities],
        "turns": [turn_to_dict(t) for t in traj.turns],
        "final_answers": list(traj.final_answers) if traj.final_answers is not None else None,
        "terminated_by": traj.terminated_by,
    }
    if traj.question_id is not None:
        out["question_id"] = traj.question_id
    return out


def trajectory_from_dict(payload: dict) -> Trajectory:
    final = payload.get("final_answers")
    return Trajectory(
        question=payload["question"],
        topic_entities=tuple((m, i) for m, i in payload.get("topic_entities", [])),
        turns=tuple(turn_from_dict(t) for t in payload.get("turns", [])),
        final_answers=tuple(final) if final is not None else None,
        terminated_by=payload["terminated_by"],
        question_id=payload.get("question_id"),
    )


def write_trajectories(trajectories: Iterable[Trajectory], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for traj in trajectories:
            fh.write(json.dumps(trajectory_to_dict(traj), ensure_ascii=False) + "\n")


def read_trajectories(path) -> list[Trajectory]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(trajectory_from_dict(json.loads(line)))
    return out
