from __future__ import annotations

from pathlib import Path

import pytest

from paql.catalog import Relation, load_csv
from paql.parser import ValidatedQuery, parse_and_validate

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

# the 5-row desk dataset: r1..r5 load as tuple ids 0..4
R1, R2, R3, R4, R5 = range(5)


@pytest.fixture(scope="session")
def meal_query_text() -> str:
    return (DATA_DIR / "meal.paql").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def desk() -> Relation:
    return load_csv("recipes", (DATA_DIR / "recipes.csv").read_bytes())


@pytest.fixture(scope="session")
def meal_vquery(desk, meal_query_text) -> ValidatedQuery:
    return parse_and_validate(meal_query_text, desk.schema)
