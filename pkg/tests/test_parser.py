from __future__ import annotations

import random

import pytest

from paql.ast import (
    Aggregate,
    And,
    BaseAtom,
    GlobalBetween,
    GlobalComparison,
    Objective,
    Or,
    PackageQuery,
    pretty_print,
)
from paql.errors import QuerySyntaxError, ValidationError
from paql.parser import parse, validate

from generators import random_ast

MINIMAL = "SELECT PACKAGE(R) AS P FROM Recipes R"


def test_meal_query_parses_to_documented_ast(meal_query_text):
    query = parse(meal_query_text)
    assert query == PackageQuery(
        relation_name="recipes",
        relation_alias="R",
        package_alias="P",
        repeat=None,
        base_predicate=BaseAtom("gluten", "=", "free"),
        global_formula=And(
            GlobalComparison(Aggregate("count", None), "=", 3.0),
            GlobalBetween(Aggregate("sum", "calories"), 2000.0, 2500.0),
        ),
        objective=Objective("maximize", Aggregate("sum", "protein")),
    )


def test_minimal_query():
    query = parse(MINIMAL)
    assert query.relation_name == "Recipes"
    assert query.repeat is None
    assert query.base_predicate is None
    assert query.global_formula is None
    assert query.objective is None


def test_repeat_clause():
    query = parse("SELECT PACKAGE(R) AS P FROM Recipes R REPEAT 2 SUCH THAT COUNT(*) = 3")
    assert query.repeat == 2
    assert query.global_formula == GlobalComparison(Aggregate("count", None), "=", 3.0)


def test_keywords_are_case_insensitive(meal_query_text):
    assert parse(meal_query_text.lower().replace("'free'", "'free'")) != parse(meal_query_text)
    # identifiers keep their case; keyword casing alone must not matter
    spaced = MINIMAL.replace("SELECT", "select").replace("FROM", "fRoM")
    assert parse(spaced) == parse(MINIMAL)


def test_line_comments_are_ignored():
    text = "-- a comment\nSELECT PACKAGE(R) AS P -- trailing\nFROM Recipes R\n"
    assert parse(text) == parse(MINIMAL)


def test_duplicate_clause_detection():
    for text, fragment in [
        (MINIMAL + " WHERE R.a = 1 WHERE R.b = 2", "WHERE"),
        (MINIMAL + " SUCH THAT COUNT(*) = 1 SUCH THAT COUNT(*) = 2", "SUCH"),
        (MINIMAL + " REPEAT 1 REPEAT 2", "REPEAT"),
        (MINIMAL + " MAXIMIZE COUNT(*) MINIMIZE COUNT(*)", "objective"),
    ]:
        with pytest.raises(QuerySyntaxError) as err:
            parse(text)
        assert err.value.code == "DUPLICATE_CLAUSE", text


def test_syntax_error_reports_position_and_expectations():
    with pytest.raises(QuerySyntaxError) as err:
        parse("SELECT PACKAGE(R) AS P\nFROM Recipes R WHERE")
    assert err.value.code == "SYNTAX_ERROR"
    assert err.value.position == (2, 21)
    assert err.value.expected


def test_package_variable_must_match_relation_alias():
    with pytest.raises(QuerySyntaxError):
        parse("SELECT PACKAGE(X) AS P FROM Recipes R")


def test_aliases_must_differ():
    with pytest.raises(QuerySyntaxError):
        parse("SELECT PACKAGE(R) AS R FROM Recipes R")


def test_subquery_in_such_that_is_unsupported():
    with pytest.raises(QuerySyntaxError) as err:
        parse(MINIMAL + " SUCH THAT (SELECT PACKAGE(Q) AS W FROM T Q) = 1")
    assert err.value.code == "UNSUPPORTED_FEATURE"


def test_unterminated_string():
    with pytest.raises(QuerySyntaxError):
        parse(MINIMAL + " WHERE R.gluten = 'free")


def test_quoted_literal_with_escaped_quote():
    query = parse(MINIMAL + " WHERE R.note = 'it''s'")
    assert query.base_predicate == BaseAtom("note", "=", "it's")


def test_negative_and_decimal_constants():
    query = parse(MINIMAL + " SUCH THAT SUM(P.temp) BETWEEN -3.5 AND 2 AND COUNT(*) >= -1")
    between = query.global_formula.left
    assert between == GlobalBetween(Aggregate("sum", "temp"), -3.5, 2.0)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def test_validate_meal_query(desk, meal_query_text):
    vquery = validate(parse(meal_query_text), desk.schema)
    assert vquery.query.base_predicate == BaseAtom("gluten", "=", "free")


def test_validate_lowercases_column_references(desk):
    vquery = validate(parse(MINIMAL + " WHERE R.GLUTEN = 'free'"), desk.schema)
    assert vquery.query.base_predicate.column == "gluten"


def test_validate_rejects_sum_over_text(desk):
    with pytest.raises(ValidationError) as err:
        validate(parse(MINIMAL + " SUCH THAT SUM(P.gluten) >= 1"), desk.schema)
    assert err.value.code == "TYPE_MISMATCH"


def test_validate_rejects_unknown_column(desk):
    with pytest.raises(ValidationError) as err:
        validate(parse(MINIMAL + " WHERE R.fat = 1"), desk.schema)
    assert err.value.code == "NO_SUCH_COLUMN"


def test_validate_rejects_empty_between(desk):
    with pytest.raises(ValidationError) as err:
        validate(parse(MINIMAL + " SUCH THAT SUM(P.calories) BETWEEN 5 AND 3"), desk.schema)
    assert err.value.code == "EMPTY_BETWEEN"


def test_validate_rejects_text_ordering(desk):
    with pytest.raises(ValidationError) as err:
        validate(parse(MINIMAL + " WHERE R.gluten < 'free'"), desk.schema)
    assert err.value.code == "TYPE_MISMATCH"


def test_validate_rejects_min_max_aggregates(desk):
    with pytest.raises(ValidationError) as err:
        validate(parse(MINIMAL + " SUCH THAT MIN(P.calories) >= 100"), desk.schema)
    assert err.value.code == "UNSUPPORTED_FEATURE"


def test_validate_rejects_avg_objective(desk):
    with pytest.raises(ValidationError) as err:
        validate(parse(MINIMAL + " MAXIMIZE AVG(P.calories)"), desk.schema)
    assert err.value.code == "UNSUPPORTED_FEATURE"


def test_type_mismatch_numeric_column_vs_string(desk):
    with pytest.raises(ValidationError) as err:
        validate(parse(MINIMAL + " WHERE R.calories = 'many'"), desk.schema)
    assert err.value.code == "TYPE_MISMATCH"


# ---------------------------------------------------------------------------
# pretty_print
# ---------------------------------------------------------------------------

def test_pretty_print_minimal():
    assert pretty_print(parse(MINIMAL)) == "SELECT PACKAGE(R) AS P FROM Recipes R"


def test_pretty_print_meal_round_trips(meal_query_text):
    query = parse(meal_query_text)
    assert parse(pretty_print(query)) == query


def test_pretty_print_keeps_boolean_structure():
    # right-nested OR must keep its parentheses
    text = MINIMAL + " SUCH THAT COUNT(*) = 1 OR (COUNT(*) = 2 OR COUNT(*) = 3)"
    query = parse(text)
    assert isinstance(query.global_formula, Or)
    assert isinstance(query.global_formula.right, Or)
    printed = pretty_print(query)
    assert "(" in printed
    assert parse(printed) == query


def test_pretty_print_nested_not():
    text = MINIMAL + " SUCH THAT NOT (COUNT(*) = 1 AND NOT COUNT(*) = 2)"
    query = parse(text)
    assert parse(pretty_print(query)) == query


def test_round_trip_generated_asts():
    rng = random.Random(1234)
    for _ in range(300):
        ast = random_ast(rng)
        printed = pretty_print(ast)
        assert parse(printed) == ast, printed


def test_fuzz_never_crashes():
    rng = random.Random(99)
    alphabet = "SELECT PACKAGE()AS FROM WHERE SUCH THAT ANDORNOT<>=.*'x1-\n\t\"  "
    base = MINIMAL + " WHERE R.a = 1 SUCH THAT COUNT(*) = 2 MAXIMIZE SUM(P.a)"
    for i in range(2000):
        if i % 2:
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
        else:
            chars = list(base)
            for _ in range(rng.randint(1, 6)):
                action = rng.random()
                pos = rng.randrange(len(chars))
                if action < 0.5:
                    chars[pos] = rng.choice(alphabet)
                else:
                    del chars[pos]
            text = "".join(chars)
        try:
            parse(text)
        except QuerySyntaxError as exc:
            assert exc.position is not None
