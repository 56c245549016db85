"""Cardinality bounds implied by global constraints, and pruned space sizes.

Bounds are sound, not tight: every valid package has a cardinality inside
``[lower, upper]``. Atoms that yield no usable bound contribute (0, unbounded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .ast import (
    And,
    GlobalBetween,
    GlobalComparison,
    GlobalFormula,
    Not,
    Or,
    multiplicity_cap,
    render_global_formula,
)
from .catalog import Relation, column_stats
from .errors import SolveError
from .evaluator import filter_base
from .parser import ValidatedQuery

_FUZZ = 1e-9


def _iceil(x: float) -> int:
    return math.ceil(x - _FUZZ)


def _ifloor(x: float) -> int:
    return math.floor(x + _FUZZ)


def _is_integral(x: float) -> bool:
    return abs(x - round(x)) <= _FUZZ


@dataclass(frozen=True)
class AtomBound:
    atom: str
    lower: int
    upper: Optional[int]  # None = unbounded


@dataclass(frozen=True)
class CardinalityBounds:
    lower: int
    upper: Optional[int]
    per_atom: tuple[AtomBound, ...] = ()

    def to_json(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "perAtom": [
                {"atom": a.atom, "lower": a.lower, "upper": a.upper} for a in self.per_atom
            ],
        }


def _count_bound(op: str, value: float, high: Optional[float] = None) -> tuple[int, Optional[int]]:
    if op == "between":
        return max(0, _iceil(value)), max(0, _ifloor(high))  # type: ignore[arg-type]
    if op == "=":
        return max(0, _iceil(value)), max(0, _ifloor(value))
    if op == "<=":
        return 0, max(0, _ifloor(value))
    if op == "<":
        ub = round(value) - 1 if _is_integral(value) else math.floor(value)
        return 0, max(0, ub)
    if op == ">=":
        return max(0, _iceil(value)), None
    if op == ">":
        lb = round(value) + 1 if _is_integral(value) else math.ceil(value)
        return max(0, lb), None
    return 0, None  # <> carries no cardinality information


def _sum_bound(
    op: str, value: float, high: Optional[float], lo_val: Optional[float], hi_val: Optional[float]
) -> tuple[int, Optional[int]]:
    # the division argument needs every qualified value strictly positive
    if lo_val is None or hi_val is None or lo_val <= 0:
        return 0, None
    if op == "between":
        return max(0, _iceil(value / hi_val)), max(0, _ifloor(high / lo_val))  # type: ignore[operator]
    if op == "=":
        return max(0, _iceil(value / hi_val)), max(0, _ifloor(value / lo_val))
    if op in ("<=", "<"):
        return 0, max(0, _ifloor(value / lo_val))
    if op in (">=", ">"):
        return max(0, _iceil(value / hi_val)), None
    return 0, None


def _atom_bound(atom: GlobalFormula, relation: Relation, vquery: ValidatedQuery) -> tuple[int, Optional[int]]:
    if isinstance(atom, GlobalBetween):
        agg, op, value, high = atom.agg, "between", atom.low, atom.high
    elif isinstance(atom, GlobalComparison):
        agg, op, value, high = atom.agg, atom.op, atom.value, None
    else:
        return 0, None
    if agg.func == "count":
        return _count_bound(op, value, high)
    if agg.func == "sum":
        stats = column_stats(relation, agg.column, vquery.query.base_predicate)
        return _sum_bound(op, value, high, stats.min, stats.max)
    return 0, None  # AVG constrains nothing about cardinality


def _flatten_and(node: GlobalFormula) -> list[GlobalFormula]:
    if isinstance(node, And):
        return _flatten_and(node.left) + _flatten_and(node.right)
    return [node]


def _flatten_or(node: GlobalFormula) -> Optional[list[GlobalFormula]]:
    """Atoms under a pure OR tree, or None if anything else is nested."""
    if isinstance(node, Or):
        left = _flatten_or(node.left)
        right = _flatten_or(node.right)
        if left is None or right is None:
            return None
        return left + right
    if isinstance(node, (GlobalComparison, GlobalBetween)):
        return [node]
    return None


def _conjunct_bound(
    node: GlobalFormula, relation: Relation, vquery: ValidatedQuery
) -> tuple[int, Optional[int]]:
    if isinstance(node, (GlobalComparison, GlobalBetween)):
        return _atom_bound(node, relation, vquery)
    if isinstance(node, Or):
        branches = _flatten_or(node)
        if branches is None:
            return 0, None
        bounds = [_atom_bound(b, relation, vquery) for b in branches]
        lower = min(b[0] for b in bounds)
        uppers = [b[1] for b in bounds]
        upper = None if any(u is None for u in uppers) else max(uppers)  # type: ignore[type-var]
        return lower, upper
    if isinstance(node, Not):
        return 0, None  # negations get no bound; soundness over tightness
    return 0, None


def bounds_for(vquery: ValidatedQuery, relation: Relation) -> CardinalityBounds:
    """Cardinality bounds for any valid package of the query.

    Each top-level conjunct contributes a bound (COUNT atoms directly, SUM
    atoms over strictly-positive columns by dividing by the column extremes,
    one-level OR groups by the loosest of their branches); the combined bound
    is the tightest intersection, with the upper finally capped at
    n * (repeat + 1) over the base-qualified tuples.
    """
    query = vquery.query
    n = len(filter_base(relation, query.base_predicate))
    cap_total = n * multiplicity_cap(query)

    per_atom: list[AtomBound] = []
    lower = 0
    upper: Optional[int] = None
    if query.global_formula is not None:
        for conjunct in _flatten_and(query.global_formula):
            lo, hi = _conjunct_bound(conjunct, relation, vquery)
            per_atom.append(
                AtomBound(render_global_formula(conjunct, query.package_alias), lo, hi)
            )
            lower = max(lower, lo)
            if hi is not None:
                upper = hi if upper is None else min(upper, hi)

    upper = cap_total if upper is None else min(upper, cap_total)
    return CardinalityBounds(lower=lower, upper=upper, per_atom=tuple(per_atom))


def pruned_space_size(n: int, bounds: CardinalityBounds) -> int:
    """Number of subsets of n tuples with cardinality in [lower, upper].

    Exact big-integer arithmetic; set semantics only (REPEAT absent).
    """
    if bounds.upper is None:
        raise SolveError("UNBOUNDED_UPPER", "cannot count subsets without an upper bound")
    lo = max(0, bounds.lower)
    hi = min(bounds.upper, n)
    return sum(math.comb(n, c) for c in range(lo, hi + 1))
