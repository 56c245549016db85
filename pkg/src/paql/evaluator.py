"""Package semantics: base filtering, aggregates, and validity checking.

This module is the semantic reference; the exact solver and the local search
are tested against it. All aggregate comparisons use an absolute tolerance
``EPSILON`` so floating error never makes the solver and this module disagree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

from .ast import (
    Aggregate,
    And,
    BasePredicate,
    GlobalBetween,
    GlobalComparison,
    GlobalFormula,
    Not,
    Or,
    multiplicity_cap,
    predicate_matches,
    render_global_formula,
)
from .catalog import Relation
from .errors import PaqlError
from .parser import ValidatedQuery

EPSILON = 1e-9


def approx_eq(a: float, b: float) -> bool:
    return abs(a - b) <= EPSILON


def approx_le(a: float, b: float) -> bool:
    return a <= b + EPSILON


def approx_ge(a: float, b: float) -> bool:
    return a >= b - EPSILON


def approx_lt(a: float, b: float) -> bool:
    return a <= b - EPSILON


def approx_gt(a: float, b: float) -> bool:
    return a >= b + EPSILON


def compare(value: float, op: str, ref: float) -> bool:
    if op == "=":
        return approx_eq(value, ref)
    if op == "<>":
        return not approx_eq(value, ref)
    if op == "<":
        return approx_lt(value, ref)
    if op == "<=":
        return approx_le(value, ref)
    if op == ">":
        return approx_gt(value, ref)
    if op == ">=":
        return approx_ge(value, ref)
    raise ValueError(f"unknown comparator {op!r}")


@dataclass
class Package:
    """A multiset of tuples from one relation: tuple_id -> multiplicity."""

    relation_name: str
    multiplicity: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self.multiplicity = {t: m for t, m in self.multiplicity.items() if m > 0}

    def count(self) -> int:
        return sum(self.multiplicity.values())

    def key(self) -> tuple:
        """Canonical sorted (id, multiplicity) tuple; usable as a dict key."""
        return tuple(sorted(self.multiplicity.items()))

    def support(self) -> frozenset[int]:
        return frozenset(self.multiplicity)

    def copy(self) -> "Package":
        return Package(self.relation_name, dict(self.multiplicity))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Package)
            and self.relation_name == other.relation_name
            and self.multiplicity == other.multiplicity
        )

    def to_json(self) -> dict:
        return {
            "relation": self.relation_name,
            "tuples": [{"id": t, "multiplicity": m} for t, m in sorted(self.multiplicity.items())],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Package":
        mult = {int(item["id"]): int(item["multiplicity"]) for item in data["tuples"]}
        return cls(relation_name=data["relation"], multiplicity=mult)


def filter_base(relation: Relation, predicate: Optional[BasePredicate]) -> list[int]:
    """Tuple ids whose rows satisfy the (validated) base predicate."""
    if predicate is None:
        return [row.tuple_id for row in relation.rows]
    index_map = relation.schema.index_map()
    return [
        row.tuple_id
        for row in relation.rows
        if predicate_matches(predicate, row.values, index_map)
    ]


def eval_aggregate(package: Package, relation: Relation, agg: Aggregate) -> float:
    """COUNT(*), SUM(col), or AVG(col) of a package.

    The empty package sums to 0 and counts 0; AVG of it raises AVG_OF_EMPTY.
    """
    if agg.func == "count":
        return float(package.count())
    idx = relation.schema.index_of(agg.column or "")
    if idx is None:
        raise PaqlError("NO_SUCH_COLUMN", f"no column {agg.column!r}")
    total = sum(relation.rows[t].values[idx] * m for t, m in package.multiplicity.items())
    if agg.func == "sum":
        return float(total)
    if agg.func == "avg":
        n = package.count()
        if n == 0:
            raise PaqlError("AVG_OF_EMPTY", "AVG over an empty package is undefined")
        return float(total) / n
    raise ValueError(f"unknown aggregate {agg.func!r}")


@dataclass
class AtomReport:
    atom: str
    value: Optional[float]
    satisfied: bool


@dataclass
class ValidityReport:
    valid: bool
    base_violations: list[int]
    multiplicity_violations: list[int]
    atoms: list[AtomReport]

    def __bool__(self) -> bool:
        return self.valid


def _eval_formula(
    node: GlobalFormula,
    package: Package,
    relation: Relation,
    package_alias: str,
    reports: list[AtomReport],
) -> bool:
    if isinstance(node, Not):
        return not _eval_formula(node.item, package, relation, package_alias, reports)
    if isinstance(node, And):
        left = _eval_formula(node.left, package, relation, package_alias, reports)
        right = _eval_formula(node.right, package, relation, package_alias, reports)
        return left and right
    if isinstance(node, Or):
        left = _eval_formula(node.left, package, relation, package_alias, reports)
        right = _eval_formula(node.right, package, relation, package_alias, reports)
        return left or right

    text = render_global_formula(node, package_alias)
    try:
        value = eval_aggregate(package, relation, node.agg)  # type: ignore[union-attr]
    except PaqlError as exc:
        if exc.code != "AVG_OF_EMPTY":
            raise
        reports.append(AtomReport(text, None, False))
        return False
    if isinstance(node, GlobalBetween):
        ok = approx_ge(value, node.low) and approx_le(value, node.high)
    else:
        assert isinstance(node, GlobalComparison)
        ok = compare(value, node.op, node.value)
    reports.append(AtomReport(text, value, ok))
    return ok


def is_valid(package: Package, vquery: ValidatedQuery, relation: Relation) -> ValidityReport:
    """Full validity check: base predicate, multiplicity cap, global formula.

    Truthiness of the returned report is the boolean answer; the report lists
    each global atom's computed aggregate and truth value.
    """
    query = vquery.query
    cap = multiplicity_cap(query)
    index_map = relation.schema.index_map()

    base_violations: list[int] = []
    mult_violations: list[int] = []
    unknown_ids = False
    for t, m in sorted(package.multiplicity.items()):
        if t < 0 or t >= len(relation.rows):
            base_violations.append(t)
            unknown_ids = True
            continue
        if query.base_predicate is not None and not predicate_matches(
            query.base_predicate, relation.rows[t].values, index_map
        ):
            base_violations.append(t)
        if m > cap:
            mult_violations.append(t)

    reports: list[AtomReport] = []
    formula_ok = True
    if query.global_formula is not None and not unknown_ids:
        formula_ok = _eval_formula(
            query.global_formula, package, relation, query.package_alias, reports
        )

    valid = not base_violations and not mult_violations and formula_ok
    return ValidityReport(valid, base_violations, mult_violations, reports)
