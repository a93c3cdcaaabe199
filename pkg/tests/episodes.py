"""Replay scripts and expected observations for the two toy case-study episodes."""

import json

from kbagym.policy import ReplayScript

TV_QUESTION = "who plays london tipton in suite life on deck?"
TV_ENTITIES = [("London Tipton", "m.07g8r3"), ("The Suite Life on Deck", "m.03mj4jm")]
TV_GOLD = ["Brenda Song"]

COLLEGE_QUESTION = "Where did Charles Drew attend college that has the latest founding date?"
COLLEGE_ENTITIES = [("Charles R. Drew", "m.018t67")]
COLLEGE_GOLD = ["McGill University Faculty of Medicine"]


def tool_call(name: str, **arguments) -> str:
    payload = json.dumps({"name": name, "arguments": arguments}, ensure_ascii=False)
    return f"<think>\nstep\n</think>\n<tool_call>\n{payload}\n</tool_call>"


def answer(items) -> str:
    inner = ", ".join(json.dumps(a, ensure_ascii=False) for a in items)
    return f"<think>\ndone\n</think>\n<answer>\nthe answer is \\boxed{{[{inner}]}}\n</answer>"


TV_SCRIPT = (
    tool_call(
        "SearchGraphPatterns",
        sparql="SELECT ?e WHERE { VALUES ?e {ns:m.07g8r3} }",
        semantic="actor/performer",
    ),
    tool_call(
        "ExecuteSPARQL",
        sparql=(
            "SELECT ?actor WHERE { VALUES ?e1 {ns:m.07g8r3} . VALUES ?e2 {ns:m.03mj4jm} . "
            "?e1 ns:film.film_character.portrayed_in_films ?cvt . ?cvt ns:film.performance.actor ?actor . "
            "?cvt ns:film.performance.film ?e2 . }"
        ),
    ),
    tool_call(
        "SearchGraphPatterns",
        sparql="SELECT ?e WHERE { VALUES ?e {ns:m.03mj4jm} }",
        semantic="actor/performer/character",
    ),
    tool_call(
        "ExecuteSPARQL",
        sparql=(
            "SELECT ?actor WHERE { VALUES ?e1 {ns:m.07g8r3} . VALUES ?e2 {ns:m.03mj4jm} . "
            "?e2 ns:award.award_nominated_work.award_nominations ?cvt . "
            "?cvt ns:award.award_nomination.award_nominee ?actor . "
            "?cvt ns:award.award_nomination.character ?e1 . }"
        ),
    ),
    tool_call(
        "ExecuteSPARQL",
        sparql=(
            "SELECT ?actor WHERE { VALUES ?e {ns:m.07g8r3} . "
            "?e ns:film.film_character.portrayed_in_films ?cvt . ?cvt ns:film.performance.actor ?actor . }"
        ),
    ),
    answer(TV_GOLD),
)

COLLEGE_SCRIPT = (
    tool_call(
        "ExecuteSPARQL",
        sparql=(
            "SELECT DISTINCT ?college WHERE { VALUES ?e {ns:m.018t67} . "
            "?e ns:people.person.education ?edu . ?edu ns:education.education.institution ?college . "
            "?college ns:organization.organization.date_founded ?founded_date . } "
            "ORDER BY DESC(xsd:date(?founded_date)) LIMIT 1"
        ),
    ),
    tool_call("SearchTypes", query="College/University"),
    tool_call(
        "ExecuteSPARQL",
        sparql=(
            "SELECT DISTINCT ?college WHERE { VALUES ?e {ns:m.018t67} . "
            "?e ns:people.person.education ?edu . ?edu ns:education.education.institution ?college . "
            "?college ns:type.object.type ns:education.university . "
            "?college ns:organization.organization.date_founded ?founded_date . } "
            "ORDER BY DESC(xsd:date(?founded_date)) LIMIT 1"
        ),
    ),
    answer(COLLEGE_GOLD),
)


def replay_script() -> ReplayScript:
    return ReplayScript({"tv-1": TV_SCRIPT, "college-1": COLLEGE_SCRIPT})
