"""Syntax tree for package queries, plus the canonical pretty-printer.

Node classes are frozen dataclasses so structural equality works out of the
box; the round-trip guarantee is ``parse(pretty_print(q)) == q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Optional, Union

COMPARATORS = ("=", "<>", "<", "<=", ">", ">=")

AGG_FUNCS = ("count", "sum", "avg", "min", "max")


@dataclass(frozen=True)
class Aggregate:
    """A package-level aggregate: COUNT(*) has ``column=None``."""

    func: str  # one of AGG_FUNCS
    column: Optional[str] = None


@dataclass(frozen=True)
class BaseAtom:
    """Per-tuple comparison ``column op literal`` from the WHERE clause."""

    column: str
    op: str  # one of COMPARATORS
    value: Union[float, str]


@dataclass(frozen=True)
class GlobalComparison:
    """Aggregate comparison ``agg op constant`` from the SUCH THAT clause."""

    agg: Aggregate
    op: str
    value: float


@dataclass(frozen=True)
class GlobalBetween:
    agg: Aggregate
    low: float
    high: float


@dataclass(frozen=True)
class Not:
    item: "BoolNode"


@dataclass(frozen=True)
class And:
    left: "BoolNode"
    right: "BoolNode"


@dataclass(frozen=True)
class Or:
    left: "BoolNode"
    right: "BoolNode"


BoolNode = Union[BaseAtom, GlobalComparison, GlobalBetween, Not, And, Or]
BasePredicate = BoolNode
GlobalFormula = BoolNode


@dataclass(frozen=True)
class Objective:
    direction: str  # "maximize" | "minimize"
    agg: Aggregate


@dataclass(frozen=True)
class PackageQuery:
    relation_name: str
    relation_alias: str
    package_alias: str
    repeat: Optional[int] = None
    base_predicate: Optional[BasePredicate] = None
    global_formula: Optional[GlobalFormula] = None
    objective: Optional[Objective] = None


def multiplicity_cap(query: PackageQuery) -> int:
    """Max occurrences of one tuple: REPEAT k allows k extra copies."""
    return (query.repeat or 0) + 1


# ---------------------------------------------------------------------------
# Tree walking
# ---------------------------------------------------------------------------

def iter_atoms(node: Optional[BoolNode]) -> Iterator[BoolNode]:
    """Yield every atom (leaf) in a boolean tree, left to right."""
    if node is None:
        return
    if isinstance(node, Not):
        yield from iter_atoms(node.item)
    elif isinstance(node, (And, Or)):
        yield from iter_atoms(node.left)
        yield from iter_atoms(node.right)
    else:
        yield node


def formula_aggregates(query: PackageQuery) -> list[Aggregate]:
    """Distinct aggregates referenced by the global formula, in order."""
    seen: list[Aggregate] = []
    for atom in iter_atoms(query.global_formula):
        agg = atom.agg  # type: ignore[union-attr]
        if agg not in seen:
            seen.append(agg)
    return seen


# ---------------------------------------------------------------------------
# Pretty-printing (canonical form)
# ---------------------------------------------------------------------------

def format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def format_text(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def render_aggregate(agg: Aggregate, package_alias: Optional[str] = None) -> str:
    if agg.func == "count":
        return "COUNT(*)"
    inner = f"{package_alias}.{agg.column}" if package_alias else agg.column
    return f"{agg.func.upper()}({inner})"


def _precedence(node: BoolNode) -> int:
    if isinstance(node, Or):
        return 1
    if isinstance(node, And):
        return 2
    if isinstance(node, Not):
        return 3
    return 4


def _render_bool(node: BoolNode, atom_fn: Callable[[BoolNode], str]) -> str:
    if isinstance(node, (And, Or)):
        word = "AND" if isinstance(node, And) else "OR"
        prec = _precedence(node)
        left = _render_bool(node.left, atom_fn)
        if _precedence(node.left) < prec:
            left = f"({left})"
        right = _render_bool(node.right, atom_fn)
        # parenthesize right children of equal precedence: the grammar is
        # left-associative, so "a OR (b OR c)" must keep its parentheses
        if _precedence(node.right) <= prec:
            right = f"({right})"
        return f"{left} {word} {right}"
    if isinstance(node, Not):
        inner = _render_bool(node.item, atom_fn)
        if _precedence(node.item) < 3:
            inner = f"({inner})"
        return f"NOT {inner}"
    return atom_fn(node)


def render_base_predicate(pred: BasePredicate, relation_alias: str) -> str:
    def atom(node: BoolNode) -> str:
        assert isinstance(node, BaseAtom)
        lit = format_text(node.value) if isinstance(node.value, str) else format_number(node.value)
        return f"{relation_alias}.{node.column} {node.op} {lit}"

    return _render_bool(pred, atom)


def render_global_formula(formula: GlobalFormula, package_alias: str) -> str:
    def atom(node: BoolNode) -> str:
        if isinstance(node, GlobalBetween):
            agg = render_aggregate(node.agg, package_alias)
            return f"{agg} BETWEEN {format_number(node.low)} AND {format_number(node.high)}"
        assert isinstance(node, GlobalComparison)
        agg = render_aggregate(node.agg, package_alias)
        return f"{agg} {node.op} {format_number(node.value)}"

    return _render_bool(formula, atom)


def pretty_print(query: PackageQuery) -> str:
    """Canonical single-line text such that re-parsing yields ``query``."""
    parts = [
        f"SELECT PACKAGE({query.relation_alias}) AS {query.package_alias}",
        f"FROM {query.relation_name} {query.relation_alias}",
    ]
    if query.repeat is not None:
        parts.append(f"REPEAT {query.repeat}")
    if query.base_predicate is not None:
        parts.append("WHERE " + render_base_predicate(query.base_predicate, query.relation_alias))
    if query.global_formula is not None:
        parts.append("SUCH THAT " + render_global_formula(query.global_formula, query.package_alias))
    if query.objective is not None:
        parts.append(
            query.objective.direction.upper()
            + " "
            + render_aggregate(query.objective.agg, query.package_alias)
        )
    return " ".join(parts)


# ---------------------------------------------------------------------------
# JSON shape (consumed by the HTTP layer and the web UI)
# ---------------------------------------------------------------------------

def _node_to_json(node: BoolNode) -> dict:
    if isinstance(node, Not):
        return {"op": "not", "item": _node_to_json(node.item)}
    if isinstance(node, (And, Or)):
        return {
            "op": "and" if isinstance(node, And) else "or",
            "left": _node_to_json(node.left),
            "right": _node_to_json(node.right),
        }
    if isinstance(node, BaseAtom):
        return {"column": node.column, "cmp": node.op, "value": node.value}
    if isinstance(node, GlobalBetween):
        return {
            "agg": {"func": node.agg.func, "column": node.agg.column},
            "cmp": "between",
            "low": node.low,
            "high": node.high,
        }
    assert isinstance(node, GlobalComparison)
    return {
        "agg": {"func": node.agg.func, "column": node.agg.column},
        "cmp": node.op,
        "value": node.value,
    }


def ast_to_json(query: PackageQuery) -> dict:
    return {
        "relation": query.relation_name,
        "relationAlias": query.relation_alias,
        "packageAlias": query.package_alias,
        "repeat": query.repeat,
        "basePredicate": _node_to_json(query.base_predicate) if query.base_predicate else None,
        "globalFormula": _node_to_json(query.global_formula) if query.global_formula else None,
        "objective": {
            "direction": query.objective.direction,
            "agg": {"func": query.objective.agg.func, "column": query.objective.agg.column},
        }
        if query.objective
        else None,
    }


# ---------------------------------------------------------------------------
# Base-predicate evaluation on a single row
# ---------------------------------------------------------------------------

def predicate_matches(
    pred: Optional[BasePredicate],
    values: tuple,
    index_of: Mapping[str, int],
) -> bool:
    """Evaluate a (validated) base predicate against one row's values.

    ``index_of`` maps lower-cased column names to positions in ``values``.
    Text comparison is exact and case-sensitive; numeric comparison is exact
    (the epsilon tolerance applies to aggregate comparisons only).
    """
    if pred is None:
        return True
    if isinstance(pred, Not):
        return not predicate_matches(pred.item, values, index_of)
    if isinstance(pred, And):
        return predicate_matches(pred.left, values, index_of) and predicate_matches(
            pred.right, values, index_of
        )
    if isinstance(pred, Or):
        return predicate_matches(pred.left, values, index_of) or predicate_matches(
            pred.right, values, index_of
        )
    assert isinstance(pred, BaseAtom)
    cell = values[index_of[pred.column.lower()]]
    op, ref = pred.op, pred.value
    if op == "=":
        return cell == ref
    if op == "<>":
        return cell != ref
    if op == "<":
        return cell < ref
    if op == "<=":
        return cell <= ref
    if op == ">":
        return cell > ref
    if op == ">=":
        return cell >= ref
    raise ValueError(f"unknown comparator {op!r}")
