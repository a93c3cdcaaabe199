import pytest

from kbagym.protocol import Action, InvalidAction, Trajectory, Turn
from kbagym.rewards import (
    PenaltyConfig,
    RewardConfig,
    RewardPhase,
    count_hallucinations,
    count_timeouts,
    default_phases,
    em_indicator,
    f_beta,
    format_reward,
    normalize_answer,
    process_penalty,
    total_reward,
)


def answered(answers, turns=()):
    return Trajectory(
        question="q?",
        turns=tuple(turns) + (Turn(thought="t", final_answer=tuple(answers)),),
        final_answers=tuple(answers),
        terminated_by="answer",
    )


def unanswered(turns=()):
    return Trajectory(question="q?", turns=tuple(turns), terminated_by="max_steps")


def action_turn(sparql, observation="[]"):
    return Turn(thought="t", action=Action("ExecuteSPARQL", {"sparql": sparql}), observation=observation)


# -- f_beta -------------------------------------------------------------------


def test_f_beta_paper_constants():
    assert f_beta(["A1"], ["A1", "A2"], 0.5) == pytest.approx(0.8333, abs=1e-4)
    assert f_beta(["A1", "A2", "A3", "A4"], ["A1", "A2"], 0.5) == pytest.approx(0.5556, abs=1e-4)
    assert f_beta(["A1"], ["A1", "A2"], 1.0) == pytest.approx(2 * 0.5 / 1.5)
    assert f_beta(["A1", "A2", "A3", "A4"], ["A1", "A2"], 1.0) == pytest.approx(2 / 3)


def test_f_beta_perfect_and_disjoint():
    for beta in (0.5, 1.0, 2.0):
        assert f_beta(["x", "y"], ["y", "x"], beta) == 1.0
    assert f_beta(["a"], ["b"], 0.5) == 0.0
    assert f_beta([], ["a"], 1.0) == 0.0


def test_f_beta_dedup_and_permutation_invariance():
    base = f_beta(["A1", "A2"], ["A1", "A2", "A3"], 0.5)
    assert f_beta(["A2", "A1", "A1", "a1 "], ["A1", "A2", "A3"], 0.5) == base


def test_f_beta_matching_is_trim_casefold():
    assert f_beta(["  brenda SONG "], ["Brenda Song"], 1.0) == 1.0
    assert normalize_answer("  A ") == "a"


def test_f_beta_contract_errors():
    with pytest.raises(ValueError):
        f_beta(["a"], [], 0.5)
    with pytest.raises(ValueError):
        f_beta(["a"], ["a"], 0.0)


def test_f_beta_curriculum_ordering():
    # Precision-leaning beta rewards a precise partial answer more than F1 does,
    # and punishes over-prediction below the precise answer's score.
    assert f_beta(["A1"], ["A1", "A2"], 0.5) > f_beta(["A1"], ["A1", "A2"], 1.0)
    assert f_beta(["A1", "A2", "A3", "A4"], ["A1", "A2"], 0.5) < f_beta(["A1"], ["A1", "A2"], 0.5)


def test_em_indicator():
    assert em_indicator(["a", "z"], ["a", "b"]) == 1.0
    assert em_indicator(["z"], ["a"]) == 0.0


# -- format reward --------------------------------------------------------------


def test_format_reward_values():
    assert format_reward(answered(["A"])) == 0.1
    assert format_reward(unanswered()) == 0.0
    assert format_reward(answered([])) == 0.1  # box present, empty list


# -- phases ----------------------------------------------------------------------


def test_default_phase_boundary_at_60_percent():
    phases = default_phases(1000)
    assert phases[0] == RewardPhase("phase1", 0.5, 0, 599)
    assert phases[1] == RewardPhase("phase2", 1.0, 600, None)
    config = RewardConfig(phases=phases)
    assert config.phase_at(0).name == "phase1"
    assert config.phase_at(599).name == "phase1"
    assert config.phase_at(600).name == "phase2"
    assert config.phase_at(10_000).beta == 1.0


def test_phase_validation():
    with pytest.raises(ValueError):
        RewardConfig(phases=(RewardPhase("a", 0.5, 0, 10), RewardPhase("b", 1.0, 12, None)))
    with pytest.raises(ValueError):
        RewardConfig(phases=(RewardPhase("a", 0.5, 5, None),))
    with pytest.raises(ValueError):
        RewardPhase("a", -1.0, 0, None)


# -- total reward ----------------------------------------------------------------


def test_total_reward_cap():
    breakdown = total_reward(answered(["A1", "A2"]), ["A1", "A2"], global_step=0)
    assert breakdown.total == 1.0
    assert breakdown.r_fmt == 0.1
    assert breakdown.r_ans == 1.0


def test_total_reward_no_box():
    breakdown = total_reward(unanswered(), ["A1"])
    assert breakdown.total == 0.0
    assert breakdown.r_fmt == 0.0
    assert breakdown.r_ans == 0.0


def test_total_reward_phase1_partial():
    breakdown = total_reward(answered(["A1"]), ["A1", "A2"], global_step=0)
    assert breakdown.phase == "phase1"
    assert breakdown.beta_used == 0.5
    assert breakdown.total == pytest.approx(0.1 + 0.625 / 0.75)


def test_total_reward_em_mode():
    config = RewardConfig(answer_mode="em")
    assert total_reward(answered(["A1", "junk"]), ["A1", "A2"], config).r_ans == 1.0


# -- penalties --------------------------------------------------------------------


def test_count_timeouts():
    t0 = action_turn("SELECT ?x WHERE { ?x a.b ?y }", observation="[]")
    t1 = action_turn("SELECT ?x WHERE { ?x a.b ?y }", observation="SPARQL timeout after 300s")
    assert count_timeouts(unanswered([t0])) == 0
    assert count_timeouts(unanswered([t0, t1])) == 1
    assert count_timeouts(unanswered([t1, t1, t1, t1])) == 4


def test_timeout_penalty_floor():
    config = PenaltyConfig(hallucination_enabled=False)
    one = unanswered([action_turn("SELECT ?x WHERE { ?x a.b ?y }", "SPARQL timeout after 300s")])
    four = unanswered([action_turn("SELECT ?x WHERE { ?x a.b ?y }", "SPARQL timeout after 300s")] * 4)
    assert process_penalty(one, config) == pytest.approx(-0.2)
    assert process_penalty(four, config) == pytest.approx(-0.5)


def test_hallucination_first_call_unobserved_relation():
    traj = unanswered([action_turn("SELECT ?x WHERE { ?x ns:made.up.relation ?y }")])
    assert count_hallucinations(traj) == 1


def test_hallucination_grounded_call_counts_zero():
    t0 = action_turn(
        "SELECT ?x WHERE { VALUES ?x {ns:m.1} }",
        observation='[(?x, film.performance.actor, "Brenda Song")]',
    )
    t1 = action_turn("SELECT ?y WHERE { ?y ns:film.performance.actor ?z }")
    assert count_hallucinations(unanswered([t0, t1])) == 0


def test_hallucination_entity_ids_and_type_predicate_excluded():
    traj = unanswered(
        [action_turn("SELECT ?x WHERE { VALUES ?x {ns:m.07g8r3} . ?x ns:type.object.type ?t }")]
    )
    assert count_hallucinations(traj) == 0


def test_hallucination_prompt_seeding_flag():
    # The system prompt mentions SELECT DISTINCT but no KB relations; a template
    # mentioning the relation grounds the first call only when seeding is on.
    traj = unanswered([action_turn("SELECT ?x WHERE { ?x ns:people.person.education ?y }")])
    assert count_hallucinations(traj, seed_history_with_prompt=False) == 1
    assert count_hallucinations(traj, seed_history_with_prompt=True) == 1
    from kbagym.protocol import PromptTemplates

    templates = PromptTemplates(
        user_template="Mentioning people.person.education here.\nQ: {question}\nE: {topic entities}"
    )
    assert count_hallucinations(traj, templates=templates) == 0


def test_hallucination_penalty_floor():
    calls = [action_turn(f"SELECT ?x WHERE {{ ?x ns:fake.rel{i}.p ?y }}") for i in range(3)]
    traj = unanswered(calls)
    assert count_hallucinations(traj) == 3
    config = PenaltyConfig(timeout_enabled=False)
    assert process_penalty(traj, config) == pytest.approx(-0.5)


def test_total_reward_with_penalty_can_go_negative():
    config = RewardConfig(penalties=PenaltyConfig())
    turns = [action_turn(f"SELECT ?x WHERE {{ ?x ns:fake.rel{i}.p ?y }}") for i in range(3)]
    breakdown = total_reward(unanswered(turns), ["A1"], config)
    assert breakdown.penalty == pytest.approx(-0.5)
    assert breakdown.total == pytest.approx(-0.5)
    assert breakdown.total >= -0.5


def test_invalid_turns_are_not_tool_calls():
    bad = Turn(thought="", invalid=InvalidAction("bad-json", "m", "ns:fake.relation.here"), observation="Invalid response format: m. Please follow the required output format.")
    assert count_hallucinations(unanswered([bad])) == 0
