import pytest

from masched.dsl import parse

from masched_fixtures import RACE_MODEL_TEXT


@pytest.fixture(scope="session")
def race_model():
    return parse(RACE_MODEL_TEXT)


@pytest.fixture(scope="session")
def race_ma(race_model):
    return race_model.automaton(mode="fo")
