import pytest

from kbagym.kb import KnowledgeBase, load_kb

from helpers import DATA_DIR


@pytest.fixture(scope="session")
def tv_character_kb() -> KnowledgeBase:
    return load_kb(DATA_DIR / "tv_character.tsv")


@pytest.fixture(scope="session")
def college_kb() -> KnowledgeBase:
    return load_kb(DATA_DIR / "college.tsv")
