import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kbagym.protocol import (
    Action,
    InvalidAction,
    ParseFailure,
    PromptTemplates,
    TemplateError,
    ThoughtAction,
    ThoughtAnswer,
    Trajectory,
    Turn,
    build_prompt,
    extract_boxed_answers,
    parse_model_output,
    read_trajectories,
    render_policy_text,
    trajectory_from_dict,
    trajectory_to_dict,
    write_trajectories,
)


# -- prompt assembly -----------------------------------------------------------


def test_build_prompt_substitutes_question_and_entities():
    bundle = build_prompt(
        "who plays london tipton in suite life on deck?",
        [("London Tipton", "m.07g8r3"), ("The Suite Life on Deck", "m.03mj4jm")],
    )
    assert "Question: who plays london tipton in suite life on deck?" in bundle.user_text
    assert "Topic Entities: London Tipton (m.07g8r3), The Suite Life on Deck (m.03mj4jm)" in bundle.user_text
    assert bundle.user_text.count("who plays london tipton") == 1
    assert "SearchGraphPatterns" in bundle.system_text


def test_build_prompt_empty_entities():
    bundle = build_prompt("what team won?", [])
    assert "Topic Entities: \n" in bundle.user_text


def test_build_prompt_is_byte_stable():
    a = build_prompt("q", [("m", "i")])
    b = build_prompt("q", [("m", "i")])
    assert a == b


def test_custom_template_missing_placeholder_fails_at_load():
    with pytest.raises(TemplateError):
        PromptTemplates(user_template="Question: {question}\n")
    with pytest.raises(TemplateError):
        PromptTemplates(user_template="{question} {topic entities} {question}")


def test_braces_in_question_do_not_explode():
    bundle = build_prompt("what is {weird} ?", [("a {b}", "m.1")])
    assert "what is {weird} ?" in bundle.user_text
    assert "a {b} (m.1)" in bundle.user_text


# -- parse_model_output ----------------------------------------------------------


def test_parse_tool_call():
    out = parse_model_output(
        '<think>x</think><tool_call>{"name":"ExecuteSPARQL","arguments":{"sparql":"SELECT ?a WHERE { ?a b.c ?d }"}}</tool_call>'
    )
    assert isinstance(out, ThoughtAction)
    assert out.thought == "x"
    assert out.action.tool == "ExecuteSPARQL"
    assert out.action.arguments["sparql"].startswith("SELECT")


def test_parse_final_answer():
    out = parse_model_output('<think>done</think><answer> the answer is \\boxed{["Brenda Song"]} </answer>')
    assert isinstance(out, ThoughtAnswer)
    assert out.answers == ("Brenda Song",)


def test_parse_unknown_tool():
    out = parse_model_output('<think>t</think><tool_call>{"name":"Frobnicate","arguments":{}}</tool_call>')
    assert isinstance(out, ParseFailure)
    assert out.reason == "unknown-tool"
    assert out.observation().startswith("Invalid response format:")
    assert out.observation().endswith("Please follow the required output format.")


def test_parse_missing_think():
    out = parse_model_output('<tool_call>{"name":"SearchTypes","arguments":{"query":"x"}}</tool_call>')
    assert isinstance(out, ParseFailure)
    assert out.reason == "missing-think"


def test_parse_bad_json():
    out = parse_model_output("<think>t</think><tool_call>{nope}</tool_call>")
    assert isinstance(out, ParseFailure)
    assert out.reason == "bad-json"


def test_parse_missing_required_argument():
    out = parse_model_output('<think>t</think><tool_call>{"name":"SearchGraphPatterns","arguments":{"semantic":"x"}}</tool_call>')
    assert isinstance(out, ParseFailure)
    assert out.reason == "missing-argument"


def test_parse_answer_without_box():
    out = parse_model_output("<think>t</think><answer>[1, 2]</answer>")
    assert isinstance(out, ParseFailure)
    assert out.reason == "no-box"


def test_parse_first_block_wins():
    text = (
        "<think>t</think>"
        '<tool_call>{"name":"SearchTypes","arguments":{"query":"a"}}</tool_call>'
        '<tool_call>{"name":"SearchTypes","arguments":{"query":"b"}}</tool_call>'
    )
    out = parse_model_output(text)
    assert isinstance(out, ThoughtAction)
    assert out.action.arguments["query"] == "a"


def test_parse_scalar_arguments_coerced():
    out = parse_model_output('<think>t</think><tool_call>{"name":"SearchTypes","arguments":{"query":"x","k":5}}</tool_call>')
    assert isinstance(out, ThoughtAction)
    assert out.action.arguments["k"] == "5"


@settings(max_examples=300)
@given(st.text(max_size=200))
def test_parse_is_total_on_adversarial_input(text):
    out = parse_model_output(text)
    assert isinstance(out, (ThoughtAction, ThoughtAnswer, ParseFailure))


# -- extract_boxed_answers -------------------------------------------------------


def test_boxed_basic():
    answers, found = extract_boxed_answers('\\boxed{["McGill University Faculty of Medicine"]}')
    assert found
    assert answers == ["McGill University Faculty of Medicine"]


def test_boxed_empty_list_vs_no_box():
    assert extract_boxed_answers("\\boxed{[]}") == ([], True)
    assert extract_boxed_answers("no box here") == ([], False)


def test_boxed_dedup_preserves_order():
    answers, _ = extract_boxed_answers('\\boxed{["A","A","B"]}')
    assert answers == ["A", "B"]


def test_boxed_nested_braces_inside_quotes():
    answers, found = extract_boxed_answers('\\boxed{["set {a, b}", "c"]}')
    assert found
    assert answers == ["set {a, b}", "c"]


def test_boxed_single_quotes_and_bare_tokens():
    answers, _ = extract_boxed_answers("\\boxed{['one', two , \"three\"]}")
    assert answers == ["one", "two", "three"]


def test_boxed_unterminated():
    assert extract_boxed_answers("\\boxed{[\"a\"")[1] is False


# -- trajectory model and round-trips --------------------------------------------


def make_trajectory():
    turns = (
        Turn(
            thought="look around",
            action=Action("SearchGraphPatterns", {"sparql": "SELECT ?e WHERE { VALUES ?e {ns:m.1} }", "semantic": "actor"}),
            observation='[(?e, a.b.c, "X")]',
        ),
        Turn(
            thought="oops",
            invalid=InvalidAction("bad-json", "tool_call is not valid JSON", "<think>oops</think><tool_call>{</tool_call>"),
            observation="Invalid response format: tool_call is not valid JSON. Please follow the required output format.",
        ),
        Turn(thought="answer now", final_answer=("X",)),
    )
    return Trajectory(
        question="q?",
        topic_entities=(("M", "m.1"),),
        turns=turns,
        final_answers=("X",),
        terminated_by="answer",
        question_id="q-1",
    )


def test_turn_invariants():
    with pytest.raises(ValueError):
        Turn(thought="t")
    with pytest.raises(ValueError):
        Turn(thought="t", action=Action("SearchTypes", {"query": "x"}), final_answer=("a",))
    with pytest.raises(ValueError):
        Turn(thought="t", final_answer=("a",), observation="obs")


def test_trajectory_invariants():
    with pytest.raises(ValueError):
        Trajectory(question="q", final_answers=("a",), terminated_by="max_steps")
    with pytest.raises(ValueError):
        Trajectory(question="q", terminated_by="answer")


def test_policy_text_round_trip():
    for turn in make_trajectory().turns:
        rendered = render_policy_text(turn)
        parsed = parse_model_output(rendered)
        if turn.action is not None:
            assert isinstance(parsed, ThoughtAction)
            assert parsed.thought == turn.thought
            assert parsed.action == turn.action
        elif turn.final_answer is not None:
            assert isinstance(parsed, ThoughtAnswer)
            assert parsed.thought == turn.thought
            assert parsed.answers == turn.final_answer
        else:
            assert isinstance(parsed, ParseFailure)


def test_jsonl_round_trip(tmp_path):
    traj = make_trajectory()
    path = tmp_path / "t.jsonl"
    write_trajectories([traj], path)
    (loaded,) = read_trajectories(path)
    assert loaded == traj
    payload = json.loads(path.read_text().splitlines()[0])
    assert set(payload) == {"question", "topic_entities", "turns", "final_answers", "terminated_by", "question_id"}


def test_dict_round_trip_no_final_answer():
    traj = Trajectory(question="q", turns=(), terminated_by="max_steps")
    assert trajectory_from_dict(trajectory_to_dict(traj)) == traj


def test_running_trajectory_not_serializable():
    with pytest.raises(ValueError):
        trajectory_to_dict(Trajectory(question="q"))
