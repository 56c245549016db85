"""Heuristic local search: repair an invalid package, then improve a valid one.

Neighbors are k-occurrence replacements (k capped at 2; larger k amounts to an
intractable 2k-way join). Moves scan the Cartesian product of package slots
and base-qualified candidate tuples.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Iterator, Optional

from .ast import (
    Aggregate,
    GlobalBetween,
    GlobalComparison,
    iter_atoms,
    multiplicity_cap,
    render_aggregate,
)
from .catalog import Relation
from .errors import SolveError
from .evaluator import Package, ValidityReport, eval_aggregate, filter_base, is_valid
from .parser import ValidatedQuery
from .pruning import bounds_for
from .solver import SolveOutcome, SolveStats


@dataclass
class LocalSearchConfig:
    max_iters: int = 200
    k_max: int = 2
    seed: int = 0
    cardinality_moves: bool = False
    restarts: int = 5


@dataclass(frozen=True)
class Replacement:
    out_slots: tuple[tuple[int, int], ...]  # (tuple_id, count) removed
    in_tuples: tuple[tuple[int, int], ...]  # (tuple_id, count) added
    resulting_deltas: tuple[tuple[str, float], ...]  # per-aggregate change


def _apply(package: Package, outs, ins) -> Package:
    mult = dict(package.multiplicity)
    for t, c in outs:
        mult[t] = mult.get(t, 0) - c
    for t, c in ins:
        mult[t] = mult.get(t, 0) + c
    return Package(package.relation_name, {t: m for t, m in mult.items() if m > 0})


def _deltas(
    old: Package, new: Package, vquery: ValidatedQuery, relation: Relation
) -> tuple[tuple[str, float], ...]:
    query = vquery.query
    aggs: list[Aggregate] = []
    for atom in iter_atoms(query.global_formula):
        agg = atom.agg  # type: ignore[union-attr]
        if agg not in aggs:
            aggs.append(agg)
    if query.objective is not None and query.objective.agg not in aggs:
        aggs.append(query.objective.agg)
    out = []
    for agg in aggs:
        try:
            before = eval_aggregate(old, relation, agg)
            after = eval_aggregate(new, relation, agg)
        except Exception:
            continue  # AVG over an empty side has no delta
        out.append((render_aggregate(agg, query.package_alias), after - before))
    return tuple(out)


def _swap_moves(
    package: Package, candidates: list[int], cap: int, k: int
) -> Iterator[tuple[tuple, tuple]]:
    """(outs, ins) pairs in (out slot index, candidate tuple id) order."""
    slots = sorted(package.multiplicity)
    if k == 1:
        for out in slots:
            for cand in candidates:
                if cand == out:
                    continue
                yield ((out, 1),), ((cand, 1),)
        return
    out_pairs = [
        pair
        for pair in combinations_with_replacement(slots, 2)
        if pair[0] != pair[1] or package.multiplicity[pair[0]] >= 2
    ]
    in_pairs = list(combinations_with_replacement(candidates, 2))
    for o1, o2 in out_pairs:
        outs = ((o1, 2),) if o1 == o2 else ((o1, 1), (o2, 1))
        for i1, i2 in in_pairs:
            if (o1, o2) == (i1, i2):
                continue  # identity replacement
            ins = ((i1, 2),) if i1 == i2 else ((i1, 1), (i2, 1))
            yield outs, ins


def find_replacements(
    package: Package, vquery: ValidatedQuery, relation: Relation, k: int
) -> list[Replacement]:
    """All k-occurrence replacements whose application is a valid package.

    For k=1 this is the scan over package slots x base-qualified candidates;
    identity swaps (same tuple out and in) are not replacements.
    """
    if k not in (1, 2):
        raise SolveError("K_UNSUPPORTED", f"k={k} not supported; replacements scan up to k=2")
    candidates = filter_base(relation, vquery.query.base_predicate)
    out: list[Replacement] = []
    for outs, ins in _swap_moves(package, candidates, multiplicity_cap(vquery.query), k):
        new = _apply(package, outs, ins)
        if is_valid(new, vquery, relation):
            out.append(Replacement(outs, ins, _deltas(package, new, vquery, relation)))
    return out


# ---------------------------------------------------------------------------
# Violation measure for the repair phase
# ---------------------------------------------------------------------------

def _atom_slack(atom, value: Optional[float]) -> float:
    if value is None:
        return 1.0
    if isinstance(atom, GlobalBetween):
        scale = max(1.0, abs(atom.low), abs(atom.high))
        return max(0.0, atom.low - value, value - atom.high) / scale
    assert isinstance(atom, GlobalComparison)
    scale = max(1.0, abs(atom.value))
    if atom.op in ("<=", "<"):
        return max(0.0, value - atom.value) / scale
    if atom.op in (">=", ">"):
        return max(0.0, atom.value - value) / scale
    if atom.op == "=":
        return abs(value - atom.value) / scale
    return 1.0  # violated <>


def violation_measure(
    package: Package, vquery: ValidatedQuery, relation: Relation
) -> tuple[int, float]:
    """(violated atom count, normalized slack); (0, 0.0) iff the package is valid."""
    report: ValidityReport = is_valid(package, vquery, relation)
    count = len(report.base_violations) + len(report.multiplicity_violations)
    slack = float(len(report.base_violations) + len(report.multiplicity_violations))
    atoms = list(iter_atoms(vquery.query.global_formula))
    for atom, atom_report in zip(atoms, report.atoms):
        if not atom_report.satisfied:
            count += 1
            slack += _atom_slack(atom, atom_report.value)
    if report.valid:
        return 0, 0.0
    return count, slack


# ---------------------------------------------------------------------------
# The search itself
# ---------------------------------------------------------------------------

def _repair_moves(
    package: Package, candidates: list[int], cap: int, config: LocalSearchConfig
) -> Iterator[tuple[tuple, tuple]]:
    yield from _swap_moves(package, candidates, cap, 1)
    if config.cardinality_moves:
        for cand in candidates:
            if package.multiplicity.get(cand, 0) < cap:
                yield (), ((cand, 1),)
        for out in sorted(package.multiplicity):
            yield ((out, 1),), ()
    if config.k_max >= 2:
        yield from _swap_moves(package, candidates, cap, 2)


def _random_start(
    rng: random.Random, candidates: list[int], cap: int, lo: int, hi: int, relation_name: str
) -> Package:
    pool = [t for t in candidates for _ in range(cap)]
    size = rng.randint(lo, hi) if hi >= lo else lo
    size = min(size, len(pool))
    mult: dict[int, int] = {}
    for t in rng.sample(pool, size):
        mult[t] = mult.get(t, 0) + 1
    return Package(relation_name, mult)


def local_search(
    vquery: ValidatedQuery, relation: Relation, config: Optional[LocalSearchConfig] = None
) -> SolveOutcome:
    """Seeded local search: random start, greedy repair, greedy improvement.

    Returns status "feasible" with a package that passes is_valid, or
    "aborted" with none; optimality and infeasibility are never claimed.
    """
    config = config or LocalSearchConfig()
    rng = random.Random(config.seed)
    query = vquery.query
    candidates = filter_base(relation, query.base_predicate)
    cap = multiplicity_cap(query)
    bounds = bounds_for(vquery, relation)
    lo, hi = bounds.lower, bounds.upper if bounds.upper is not None else len(candidates) * cap

    trajectory: list = []
    total_iters = 0

    def finish(status: str, package: Optional[Package]) -> SolveOutcome:
        digest = hashlib.sha256(repr(trajectory).encode()).hexdigest()
        stats = SolveStats(nodes=total_iters, trajectory_hash=digest)
        objective_value = None
        if package is not None and query.objective is not None:
            objective_value = eval_aggregate(package, relation, query.objective.agg)
        return SolveOutcome(status, package, objective_value, stats)

    if hi < lo:
        return finish("aborted", None)

    for attempt in range(config.restarts + 1):
        current = _random_start(rng, candidates, cap, lo, hi, relation.name)
        trajectory.append(("start", attempt, current.key()))
        iters = 0

        while iters < config.max_iters:
            measure = violation_measure(current, vquery, relation)
            if measure[0] == 0:
                break
            moved = False
            for outs, ins in _repair_moves(current, candidates, cap, config):
                new = _apply(current, outs, ins)
                if any(m > cap for m in new.multiplicity.values()):
                    continue
                if violation_measure(new, vquery, relation) < measure:
                    current = new
                    iters += 1
                    trajectory.append(("repair", outs, ins))
                    moved = True
                    break
            if not moved:
                break  # invalid local optimum

        if not is_valid(current, vquery, relation):
            total_iters += iters
            continue  # restart

        if query.objective is not None:
            sense = 1.0 if query.objective.direction == "maximize" else -1.0
            while iters < config.max_iters:
                value = eval_aggregate(current, relation, query.objective.agg)
                best_gain = 0.0
                best_new = None
                best_move = None
                for rep in find_replacements(current, vquery, relation, 1):
                    new = _apply(current, rep.out_slots, rep.in_tuples)
                    gain = sense * (
                        eval_aggregate(new, relation, query.objective.agg) - value
                    )
                    if gain > best_gain + 1e-12:
                        best_gain, best_new, best_move = gain, new, (rep.out_slots, rep.in_tuples)
                if config.cardinality_moves:
                    extra = []
                    for cand in candidates:
                        if current.multiplicity.get(cand, 0) < cap:
                            extra.append(((), ((cand, 1),)))
                    for out in sorted(current.multiplicity):
                        extra.append((((out, 1),), ()))
                    for outs, ins in extra:
                        new = _apply(current, outs, ins)
                        if not is_valid(new, vquery, relation):
                            continue
                        gain = sense * (
                            eval_aggregate(new, relation, query.objective.agg) - value
                        )
                        if gain > best_gain + 1e-12:
                            best_gain, best_new, best_move = gain, new, (outs, ins)
                if best_new is None:
                    break  # objective local optimum
                current = best_new
                iters += 1
                trajectory.append(("improve",) + best_move)

        total_iters += iters
        return finish("feasible", current)

    return finish("aborted", None)
