from __future__ import annotations

import random
from dataclasses import replace

import pytest

from paql.errors import SolveError
from paql.evaluator import EPSILON, Package, eval_aggregate, is_valid
from paql.parser import parse_and_validate
from paql.pruning import CardinalityBounds, bounds_for
from paql.solver import (
    IlpModel,
    LinearRow,
    SolverConfig,
    brute_force_oracle,
    dump_lp,
    normalize_to_dnf,
    solve,
    solve_formula,
    translate,
)

from conftest import R1, R2, R3, R4
from generators import random_instance

Q = "SELECT PACKAGE(R) AS P FROM recipes R "


# ---------------------------------------------------------------------------
# translate
# ---------------------------------------------------------------------------

def test_translate_meal_query(desk, meal_vquery):
    bounds = bounds_for(meal_vquery, desk)
    model = translate(meal_vquery, desk, bounds)
    assert model.tuple_ids == (R1, R2, R3, R4)
    assert model.upper == (1, 1, 1, 1)
    assert [(row.op, row.rhs) for row in model.rows] == [
        ("=", 3.0),
        (">=", 2000.0),
        ("<=", 2500.0),
    ]
    assert model.rows[0].coeffs == (1.0, 1.0, 1.0, 1.0)
    assert model.rows[1].coeffs == (700.0, 800.0, 900.0, 600.0)
    assert (model.count_lower, model.count_upper) == (3, 3)
    assert model.objective == ("maximize", (30.0, 40.0, 35.0, 25.0))


def test_translate_empty_query(desk):
    vquery = parse_and_validate(Q.strip(), desk.schema)
    model = translate(vquery, desk)
    assert model.rows == [] and model.objective is None
    assert model.upper == (1, 1, 1, 1, 1)


def test_translate_avg_linearization(desk, meal_vquery):
    vquery = parse_and_validate(
        Q + "WHERE R.gluten = 'free' SUCH THAT AVG(P.calories) <= 750", desk.schema
    )
    model = translate(vquery, desk)
    avg_row = model.rows[0]
    assert avg_row.coeffs == (-50.0, 50.0, 150.0, -150.0)
    assert (avg_row.op, avg_row.rhs) == ("<=", 0.0)
    guard = model.rows[1]
    assert (guard.op, guard.rhs) == (">=", 1.0)
    # spot-check against direct aggregate evaluation over enumerated packages
    for package, _ in brute_force_oracle(vquery, desk):
        avg = eval_aggregate(package, desk, vquery.query.global_formula.agg)
        assert avg <= 750 + EPSILON


def test_translate_rejects_disjunctions(desk):
    vquery = parse_and_validate(Q + "SUCH THAT COUNT(*) = 1 OR COUNT(*) = 2", desk.schema)
    with pytest.raises(SolveError) as err:
        translate(vquery, desk)
    assert err.value.code == "UNSUPPORTED_FEATURE"


# ---------------------------------------------------------------------------
# DNF normalization
# ---------------------------------------------------------------------------

def test_dnf_conjunction_is_single_disjunct(meal_vquery):
    branches = normalize_to_dnf(meal_vquery.query.global_formula)
    assert len(branches) == 1
    assert [(p.agg.func, p.op, p.rhs) for p in branches[0]] == [
        ("count", "=", 3.0),
        ("sum", ">=", 2000.0),
        ("sum", "<=", 2500.0),
    ]


def test_dnf_not_flips_comparator(desk):
    vquery = parse_and_validate(Q + "SUCH THAT NOT (COUNT(*) >= 4)", desk.schema)
    branches = normalize_to_dnf(vquery.query.global_formula)
    assert len(branches) == 1
    prim = branches[0][0]
    assert prim.op == "<=" and prim.rhs == pytest.approx(4.0 - EPSILON) and prim.exact


def test_dnf_not_equal_splits(desk):
    vquery = parse_and_validate(Q + "SUCH THAT SUM(P.calories) <> 700", desk.schema)
    branches = normalize_to_dnf(vquery.query.global_formula)
    assert [(b[0].op,) for b in branches] == [("<=",), (">=",)]


def test_dnf_blowup_guard(desk):
    clause = " AND ".join(f"(COUNT(*) = {i} OR COUNT(*) = {i + 1})" for i in range(8))
    vquery = parse_and_validate(Q + "SUCH THAT " + clause, desk.schema)
    with pytest.raises(SolveError) as err:
        normalize_to_dnf(vquery.query.global_formula, max_dnf=64)
    assert err.value.code == "DNF_BLOWUP"


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_meal_query_optimal(desk, meal_vquery):
    outcome = solve_formula(meal_vquery, desk)
    assert outcome.status == "optimal"
    assert outcome.package == Package("recipes", {R1: 1, R2: 1, R3: 1})
    assert outcome.objective_value == pytest.approx(105.0)


def test_meal_query_infeasible_band(desk):
    vquery = parse_and_validate(
        Q
        + "WHERE R.gluten = 'free' SUCH THAT COUNT(*) = 3 "
        + "AND SUM(P.calories) BETWEEN 5000 AND 6000 MAXIMIZE SUM(P.protein)",
        desk.schema,
    )
    assert solve_formula(vquery, desk).status == "infeasible"
    assert brute_force_oracle(vquery, desk) == []


def test_zero_variable_contradiction():
    model = IlpModel(
        relation_name="r",
        tuple_ids=(),
        upper=(),
        rows=[LinearRow((), ">=", 1.0)],
    )
    assert solve(model).status == "infeasible"


def test_returned_package_is_always_valid(desk, meal_vquery):
    outcome = solve_formula(meal_vquery, desk)
    assert is_valid(outcome.package, meal_vquery, desk).valid


def test_solve_formula_one_level_or(desk):
    vquery = parse_and_validate(
        Q
        + "WHERE R.gluten = 'free' "
        + "SUCH THAT (COUNT(*) = 2 OR COUNT(*) = 3) AND SUM(P.calories) <= 2400 "
        + "MAXIMIZE SUM(P.protein)",
        desk.schema,
    )
    outcome = solve_formula(vquery, desk)
    assert outcome.status == "optimal"
    assert outcome.package == Package("recipes", {R1: 1, R2: 1, R3: 1})
    assert outcome.objective_value == pytest.approx(105.0)
    assert outcome.stats.disjuncts == 2


def test_not_count_exploits_flip(desk):
    vquery = parse_and_validate(
        Q + "SUCH THAT NOT (COUNT(*) >= 4) MAXIMIZE COUNT(*)", desk.schema
    )
    outcome = solve_formula(vquery, desk)
    assert outcome.status == "optimal"
    assert outcome.objective_value == pytest.approx(3.0)


def test_repeat_allows_multiplicity(desk):
    vquery = parse_and_validate(
        Q + "REPEAT 2 SUCH THAT COUNT(*) = 9 MAXIMIZE SUM(P.protein)", desk.schema
    )
    outcome = solve_formula(vquery, desk)
    assert outcome.status == "optimal"
    # best: three each of the top protein rows r2 (40), r3 (35), r1 (30)
    assert outcome.objective_value == pytest.approx(3 * 40 + 3 * 35 + 3 * 30)


def test_timeout_aborts():
    rng = random.Random(0)
    relation, vquery = random_instance(rng, max_n=12, repeat_choices=(1,))
    outcome = solve_formula(vquery, relation, SolverConfig(timeout_ms=0))
    assert outcome.status in ("aborted", "feasible")
    assert outcome.stats.timed_out


def test_determinism(desk, meal_vquery):
    a = solve_formula(meal_vquery, desk, SolverConfig(seed=5))
    b = solve_formula(meal_vquery, desk, SolverConfig(seed=5))
    assert a.package == b.package
    assert a.objective_value == b.objective_value
    assert a.stats.nodes == b.stats.nodes


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def test_oracle_meal_query(desk, meal_vquery):
    results = brute_force_oracle(meal_vquery, desk)
    assert len(results) == 4
    assert results[0][1] == pytest.approx(105.0)
    assert results[0][0] == Package("recipes", {R1: 1, R2: 1, R3: 1})
    assert sorted(value for _, value in results) == [90.0, 95.0, 100.0, 105.0]


def test_oracle_power_set(desk):
    vquery = parse_and_validate(Q + "WHERE R.calories >= 700", desk.schema)
    results = brute_force_oracle(vquery, desk)
    assert len(results) == 8  # three qualifying tuples
    assert results[0][0].count() == 0  # lexicographically first: the empty package


def test_oracle_repeat_multiplicities():
    from paql.catalog import load_csv

    rel = load_csv("two", b"v\n1\n2\n")
    vquery = parse_and_validate(
        "SELECT PACKAGE(R) AS P FROM two R REPEAT 1 SUCH THAT COUNT(*) = 2", rel.schema
    )
    results = brute_force_oracle(vquery, rel)
    keys = [package.key() for package, _ in results]
    assert keys == [((0, 1), (1, 1)), ((0, 2),), ((1, 2),)]


def test_oracle_guard_rail():
    rng = random.Random(1)
    relation, vquery = random_instance(rng, max_n=12, repeat_choices=(None,))
    vquery = replace(vquery, query=replace(vquery.query, repeat=9))
    with pytest.raises(SolveError) as err:
        brute_force_oracle(vquery, relation)
    assert err.value.code == "TOO_LARGE"


def test_oracle_respects_bounds_restriction(desk, meal_vquery):
    unrestricted = brute_force_oracle(meal_vquery, desk)
    restricted = brute_force_oracle(meal_vquery, desk, CardinalityBounds(3, 3))
    assert unrestricted == restricted


# ---------------------------------------------------------------------------
# solver-vs-oracle properties
# ---------------------------------------------------------------------------

def test_oracle_equivalence_sample():
    rng = random.Random(2024)
    for _ in range(120):
        relation, vquery = random_instance(rng, allow_or=True)
        outcome = solve_formula(vquery, relation)
        results = brute_force_oracle(vquery, relation)
        if not results:
            assert outcome.status == "infeasible", vquery
            continue
        assert outcome.status in ("optimal", "feasible"), vquery
        assert is_valid(outcome.package, vquery, relation).valid
        if vquery.query.objective is not None:
            assert outcome.objective_value == pytest.approx(results[0][1], abs=1e-9)


def test_pruning_neutrality():
    rng = random.Random(77)
    for _ in range(60):
        relation, vquery = random_instance(rng, allow_or=True)
        with_bounds = solve_formula(vquery, relation, SolverConfig(use_pruning=True))
        without = solve_formula(vquery, relation, SolverConfig(use_pruning=False))
        assert with_bounds.status == without.status or {
            with_bounds.status,
            without.status,
        } <= {"optimal", "feasible"}
        if with_bounds.objective_value is not None:
            assert without.objective_value == pytest.approx(
                with_bounds.objective_value, abs=1e-9
            )


def test_argmax_invariance_under_positive_scaling(desk, meal_vquery):
    outcome = solve_formula(meal_vquery, desk)
    model = translate(meal_vquery, desk, bounds_for(meal_vquery, desk))
    direction, coeffs = model.objective
    for factor in (2.0, 10.0, 0.5):
        scaled = replace(model, objective=(direction, tuple(factor * c for c in coeffs)))
        scaled_outcome = solve(scaled)
        assert scaled_outcome.package == outcome.package
        assert scaled_outcome.objective_value == pytest.approx(
            factor * outcome.objective_value
        )


# ---------------------------------------------------------------------------
# LP dump
# ---------------------------------------------------------------------------

def test_dump_lp_meal_model(desk, meal_vquery):
    model = translate(meal_vquery, desk, bounds_for(meal_vquery, desk))
    text = dump_lp(model)
    assert "Maximize" in text
    assert "obj: 30 x0 + 40 x1 + 35 x2 + 25 x3" in text
    assert "c0: x0 + x1 + x2 + x3 = 3" in text
    assert "c1: 700 x0 + 800 x1 + 900 x2 + 600 x3 >= 2000" in text
    assert "card_lo: x0 + x1 + x2 + x3 >= 3" in text
    assert " 0 <= x0 <= 1" in text
    assert text.rstrip().endswith("End")


def test_dump_lp_feasibility_model(desk):
    vquery = parse_and_validate(Q + "SUCH THAT COUNT(*) = 2", desk.schema)
    text = dump_lp(translate(vquery, desk))
    assert text.splitlines()[1] == "Minimize"
