from __future__ import annotations

import random

import pytest

from paql.catalog import load_csv
from paql.errors import SolveError
from paql.evaluator import Package, filter_base, is_valid
from paql.local_search import (
    LocalSearchConfig,
    find_replacements,
    local_search,
    violation_measure,
)
from paql.parser import parse_and_validate
from paql.solver import brute_force_oracle

from generators import random_instance, random_package

Q = "SELECT PACKAGE(R) AS P FROM recipes R "


@pytest.fixture(scope="module")
def swap_relation():
    # slots 1200/1000/800 (ids 0..2), candidates 300/600/900 (ids 3..5)
    return load_csv("meals", b"calories\n1200\n1000\n800\n300\n600\n900\n")


@pytest.fixture(scope="module")
def swap_vquery(swap_relation):
    return parse_and_validate(
        "SELECT PACKAGE(R) AS P FROM meals R SUCH THAT SUM(P.calories) <= 2500",
        swap_relation.schema,
    )


def test_single_swap_scenario(swap_relation, swap_vquery):
    start = Package("meals", {0: 1, 1: 1, 2: 1})  # totals 3000
    replacements = find_replacements(start, swap_vquery, swap_relation, k=1)
    moves = {(rep.out_slots[0][0], rep.in_tuples[0][0]) for rep in replacements}
    # 3000 - out + in <= 2500 over the 9 slot x candidate pairs
    assert moves == {(0, 3), (0, 4), (1, 3), (2, 3)}
    assert len(replacements) == 4
    for rep in replacements:
        deltas = dict(rep.resulting_deltas)
        assert deltas["SUM(P.calories)"] <= -500.0


def test_replacement_deltas_track_aggregates(swap_relation, swap_vquery):
    start = Package("meals", {0: 1, 1: 1, 2: 1})
    rep = find_replacements(start, swap_vquery, swap_relation, k=1)[0]
    assert rep.out_slots == ((0, 1),) and rep.in_tuples == ((3, 1),)
    assert dict(rep.resulting_deltas)["SUM(P.calories)"] == -900.0


def test_count_preserving_swaps(desk):
    vquery = parse_and_validate(Q + "SUCH THAT COUNT(*) = 3", desk.schema)
    start = Package("recipes", {0: 1, 1: 1, 2: 1})
    replacements = find_replacements(start, vquery, desk, k=1)
    # every swap keeps cardinality 3: each of 3 slots x 2 non-member candidates
    assert len(replacements) == 6
    for rep in replacements:
        new_count = start.count()
        assert sum(c for _, c in rep.out_slots) == sum(c for _, c in rep.in_tuples) == 1
        assert new_count == 3


def test_two_changes_needed_defeats_k1():
    # two atoms, each violated by a different slot: a single swap fixes at
    # most one of them, so no 1-replacement reaches a valid package
    rel = load_csv("m", b"a,b\n9,0\n0,9\n1,1\n2,2\n")
    vquery = parse_and_validate(
        "SELECT PACKAGE(R) AS P FROM m R SUCH THAT SUM(P.a) <= 5 AND SUM(P.b) <= 5",
        rel.schema,
    )
    start = Package("m", {0: 1, 1: 1})  # a-sum 9 and b-sum 9 both violated
    assert find_replacements(start, vquery, rel, k=1) == []
    # but a 2-replacement exists
    assert find_replacements(start, vquery, rel, k=2)


def test_k_guard():
    rel = load_csv("m", b"a\n1\n")
    vquery = parse_and_validate("SELECT PACKAGE(R) AS P FROM m R", rel.schema)
    with pytest.raises(SolveError) as err:
        find_replacements(Package("m", {0: 1}), vquery, rel, k=3)
    assert err.value.code == "K_UNSUPPORTED"


def test_neighbor_exactness_against_pair_scan():
    rng = random.Random(31)
    checked = 0
    for _ in range(60):
        relation, vquery = random_instance(rng, max_n=8)
        package = random_package(rng, relation, vquery)
        if not package.multiplicity:
            continue
        got = {
            (rep.out_slots, rep.in_tuples)
            for rep in find_replacements(package, vquery, relation, k=1)
        }
        expected = set()
        candidates = filter_base(relation, vquery.query.base_predicate)
        for out in sorted(package.multiplicity):
            for cand in candidates:
                if cand == out:
                    continue
                mult = dict(package.multiplicity)
                mult[out] -= 1
                mult[cand] = mult.get(cand, 0) + 1
                new = Package(relation.name, {t: m for t, m in mult.items() if m > 0})
                if is_valid(new, vquery, relation):
                    expected.add((((out, 1),), ((cand, 1),)))
        assert got == expected
        checked += 1
    assert checked >= 40


def test_violation_measure_zero_iff_valid(desk, meal_vquery):
    assert violation_measure(Package("recipes", {0: 1, 1: 1, 2: 1}), meal_vquery, desk) == (0, 0.0)
    measure = violation_measure(Package("recipes", {0: 1}), meal_vquery, desk)
    assert measure[0] > 0 and measure[1] > 0


def test_local_search_reaches_a_valid_meal(desk, meal_vquery):
    for seed in range(8):
        outcome = local_search(meal_vquery, desk, LocalSearchConfig(seed=seed))
        assert outcome.status == "feasible"
        assert is_valid(outcome.package, meal_vquery, desk).valid
        assert outcome.objective_value in {90.0, 95.0, 100.0, 105.0}


def test_local_search_infeasible_aborts(desk):
    vquery = parse_and_validate(
        Q + "WHERE R.gluten = 'free' SUCH THAT SUM(P.calories) BETWEEN 5000 AND 6000",
        desk.schema,
    )
    outcome = local_search(vquery, desk, LocalSearchConfig(seed=1, max_iters=40))
    assert outcome.status == "aborted"
    assert outcome.package is None


def test_valid_start_is_a_fixed_point(desk):
    # feasibility-only query whose bounds force every start to be valid
    vquery = parse_and_validate(Q + "SUCH THAT COUNT(*) = 2", desk.schema)
    outcome = local_search(vquery, desk, LocalSearchConfig(seed=3))
    assert outcome.status == "feasible"
    assert outcome.stats.nodes == 0
    assert outcome.package.count() == 2


def test_seeded_determinism():
    rng = random.Random(17)
    for _ in range(20):
        relation, vquery = random_instance(rng, max_n=8)
        seed = rng.randrange(10_000)
        first = local_search(vquery, relation, LocalSearchConfig(seed=seed))
        second = local_search(vquery, relation, LocalSearchConfig(seed=seed))
        assert first.stats.trajectory_hash == second.stats.trajectory_hash
        assert first.package == second.package


def test_soundness_on_random_instances():
    rng = random.Random(23)
    feasible = 0
    for _ in range(80):
        relation, vquery = random_instance(rng, max_n=8)
        outcome = local_search(vquery, relation, LocalSearchConfig(seed=rng.randrange(999)))
        if outcome.status == "feasible":
            assert is_valid(outcome.package, vquery, relation).valid
            feasible += 1
        else:
            assert outcome.package is None
    assert feasible >= 30


def test_objective_never_worsens_while_valid(desk, meal_vquery):
    outcome = local_search(meal_vquery, desk, LocalSearchConfig(seed=2))
    # the meal query's landscape lets 1-swaps reach the optimum from any
    # valid 3-package, so the improvement phase must end at 105
    oracle_best = brute_force_oracle(meal_vquery, desk)[0][1]
    assert outcome.objective_value == pytest.approx(oracle_best)


def test_cardinality_moves_explore_other_sizes(desk):
    vquery = parse_and_validate(
        Q + "WHERE R.gluten = 'free' SUCH THAT SUM(P.calories) <= 2500 MAXIMIZE COUNT(*)",
        desk.schema,
    )
    plain = local_search(vquery, desk, LocalSearchConfig(seed=5, cardinality_moves=False))
    moving = local_search(vquery, desk, LocalSearchConfig(seed=5, cardinality_moves=True))
    assert moving.status == "feasible"
    assert moving.objective_value >= plain.objective_value
