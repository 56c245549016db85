"""Exact package solving: ILP translation plus depth-first branch-and-bound.

A validated query becomes one integer model per DNF disjunct of its global
formula; each model is solved exactly by DFS with interval-arithmetic
feasibility pruning and an objective bound from a greedy single-constraint
LP relaxation (fractional-knapsack style, evaluated in dual form).

The brute-force enumerator lives here too, as the test oracle.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .ast import (
    Aggregate,
    And,
    GlobalBetween,
    GlobalComparison,
    GlobalFormula,
    Not,
    Or,
    multiplicity_cap,
)
from .catalog import Relation
from .errors import SolveError
from .evaluator import EPSILON, Package, eval_aggregate, filter_base, is_valid
from .parser import ValidatedQuery
from .pruning import CardinalityBounds, bounds_for


@dataclass
class SolverConfig:
    seed: int = 0
    timeout_ms: Optional[int] = None
    max_dnf: int = 64
    use_pruning: bool = True


@dataclass
class SolveStats:
    nodes: int = 0
    elapsed_ms: float = 0.0
    disjuncts: int = 1
    timed_out: bool = False
    trajectory_hash: Optional[str] = None  # set by the local search only

    def to_json(self, include_time: bool = True) -> dict:
        data = {"nodes": self.nodes, "disjuncts": self.disjuncts, "timedOut": self.timed_out}
        if include_time:
            data["elapsedMs"] = round(self.elapsed_ms, 3)
        if self.trajectory_hash is not None:
            data["trajectoryHash"] = self.trajectory_hash
        return data


@dataclass
class SolveOutcome:
    status: str  # "optimal" | "feasible" | "infeasible" | "aborted"
    package: Optional[Package] = None
    objective_value: Optional[float] = None
    stats: SolveStats = field(default_factory=SolveStats)


@dataclass(frozen=True)
class LinearRow:
    coeffs: tuple[float, ...]
    op: str  # "<=" | ">=" | "="
    rhs: float
    exact: bool = False  # rhs already epsilon-adjusted (from a strict atom)
    label: str = ""


@dataclass
class IlpModel:
    relation_name: str
    tuple_ids: tuple[int, ...]
    upper: tuple[int, ...]  # per-variable multiplicity cap; lower is 0
    rows: list[LinearRow]
    count_lower: int = 0
    count_upper: Optional[int] = None
    objective: Optional[tuple[str, tuple[float, ...]]] = None  # (direction, coeffs)
    nogood_cuts: list[LinearRow] = field(default_factory=list)

    def all_rows(self) -> list[LinearRow]:
        return self.rows + self.nogood_cuts


# ---------------------------------------------------------------------------
# Formula normalization (negation push-down + DNF expansion)
# ---------------------------------------------------------------------------

_FLIP = {"=": "<>", "<>": "=", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}


@dataclass(frozen=True)
class Primitive:
    """One ``agg op rhs`` with op restricted to <=, >=, =."""

    agg: Aggregate
    op: str
    rhs: float
    exact: bool = False


def _push_not(node: GlobalFormula, negate: bool) -> GlobalFormula:
    if isinstance(node, Not):
        return _push_not(node.item, not negate)
    if isinstance(node, And):
        left, right = _push_not(node.left, negate), _push_not(node.right, negate)
        return Or(left, right) if negate else And(left, right)
    if isinstance(node, Or):
        left, right = _push_not(node.left, negate), _push_not(node.right, negate)
        return And(left, right) if negate else Or(left, right)
    if not negate:
        return node
    if isinstance(node, GlobalBetween):
        return Or(
            GlobalComparison(node.agg, "<", node.low),
            GlobalComparison(node.agg, ">", node.high),
        )
    assert isinstance(node, GlobalComparison)
    return GlobalComparison(node.agg, _FLIP[node.op], node.value)


def _atom_branches(node: GlobalFormula) -> list[list[Primitive]]:
    if isinstance(node, GlobalBetween):
        return [[Primitive(node.agg, ">=", node.low), Primitive(node.agg, "<=", node.high)]]
    assert isinstance(node, GlobalComparison)
    agg, op, v = node.agg, node.op, node.value
    if op in ("<=", ">=", "="):
        return [[Primitive(agg, op, v)]]
    if op == "<":
        return [[Primitive(agg, "<=", v - EPSILON, exact=True)]]
    if op == ">":
        return [[Primitive(agg, ">=", v + EPSILON, exact=True)]]
    assert op == "<>"
    return [
        [Primitive(agg, "<=", v - EPSILON, exact=True)],
        [Primitive(agg, ">=", v + EPSILON, exact=True)],
    ]


def normalize_to_dnf(formula: Optional[GlobalFormula], max_dnf: int = 64) -> list[list[Primitive]]:
    """Rewrite a global formula as a list of conjunctions of primitives.

    Raises DNF_BLOWUP when the disjunct count exceeds ``max_dnf``.
    """
    if formula is None:
        return [[]]

    def expand(node: GlobalFormula) -> list[list[Primitive]]:
        if isinstance(node, And):
            left, right = expand(node.left), expand(node.right)
            if len(left) * len(right) > max_dnf:
                raise SolveError(
                    "DNF_BLOWUP",
                    f"formula expands to more than {max_dnf} disjuncts",
                )
            return [l + r for l in left for r in right]
        if isinstance(node, Or):
            left, right = expand(node.left), expand(node.right)
            if len(left) + len(right) > max_dnf:
                raise SolveError(
                    "DNF_BLOWUP",
                    f"formula expands to more than {max_dnf} disjuncts",
                )
            return left + right
        return _atom_branches(node)

    return expand(_push_not(formula, False))


# ---------------------------------------------------------------------------
# Translation
# ---------------------------------------------------------------------------

def _objective_coeffs(agg: Aggregate, relation: Relation, tuple_ids: Sequence[int]) -> tuple[float, ...]:
    if agg.func == "count":
        return tuple(1.0 for _ in tuple_ids)
    idx = relation.schema.index_of(agg.column or "")
    return tuple(float(relation.rows[t].values[idx]) for t in tuple_ids)


def _translate_primitives(
    primitives: Sequence[Primitive],
    vquery: ValidatedQuery,
    relation: Relation,
    bounds: Optional[CardinalityBounds],
    base_ids: Sequence[int],
    use_objective: bool = True,
) -> IlpModel:
    query = vquery.query
    cap = multiplicity_cap(query)
    tuple_ids = tuple(base_ids)
    n = len(tuple_ids)
    ones = tuple(1.0 for _ in range(n))

    def col(name: str) -> tuple[float, ...]:
        idx = relation.schema.index_of(name)
        return tuple(float(relation.rows[t].values[idx]) for t in tuple_ids)

    rows: list[LinearRow] = []
    for prim in primitives:
        label = f"{prim.agg.func}({prim.agg.column or '*'}) {prim.op} {prim.rhs}"
        if prim.agg.func == "count":
            rows.append(LinearRow(ones, prim.op, prim.rhs, prim.exact, label))
        elif prim.agg.func == "sum":
            rows.append(LinearRow(col(prim.agg.column), prim.op, prim.rhs, prim.exact, label))
        else:  # avg: SUM(col) - rhs * COUNT cmp 0, guarded by COUNT >= 1
            values = col(prim.agg.column)
            coeffs = tuple(v - prim.rhs for v in values)
            rows.append(LinearRow(coeffs, prim.op, 0.0, prim.exact, label))
            rows.append(LinearRow(ones, ">=", 1.0, False, "count >= 1 (avg guard)"))

    objective = None
    if use_objective and query.objective is not None:
        objective = (
            query.objective.direction,
            _objective_coeffs(query.objective.agg, relation, tuple_ids),
        )

    return IlpModel(
        relation_name=relation.name,
        tuple_ids=tuple_ids,
        upper=tuple(cap for _ in range(n)),
        rows=rows,
        count_lower=bounds.lower if bounds else 0,
        count_upper=bounds.upper if bounds else None,
        objective=objective,
    )


def translate(
    vquery: ValidatedQuery,
    relation: Relation,
    bounds: Optional[CardinalityBounds] = None,
) -> IlpModel:
    """Translate a conjunctive query into a single integer model.

    Raises UNSUPPORTED_FEATURE when the formula needs more than one DNF
    disjunct; ``solve_formula`` handles those.
    """
    branches = normalize_to_dnf(vquery.query.global_formula)
    if len(branches) != 1:
        raise SolveError(
            "UNSUPPORTED_FEATURE",
            "disjunctive formula does not reduce to one conjunction; use solve_formula",
        )
    base_ids = filter_base(relation, vquery.query.base_predicate)
    return _translate_primitives(branches[0], vquery, relation, bounds, base_ids)


def nogood_row(
    tuple_ids: Sequence[int],
    support: frozenset[int],
    pinned_ids: frozenset[int],
) -> LinearRow:
    """Row forbidding any assignment whose unpinned support equals ``support``.

    sum_{t in S}(1 - x_t) + sum_{t unpinned, not in S} x_t >= 1, rewritten as
    a linear row over the model's variables (pinned variables excluded).
    """
    coeffs = []
    for t in tuple_ids:
        if t in pinned_ids:
            coeffs.append(0.0)
        elif t in support:
            coeffs.append(-1.0)
        else:
            coeffs.append(1.0)
    return LinearRow(tuple(coeffs), ">=", 1.0 - len(support), False, "nogood")


# ---------------------------------------------------------------------------
# Branch-and-bound search
# ---------------------------------------------------------------------------

class _Timeout(Exception):
    pass


def _row_tolerance(row: LinearRow) -> float:
    return 0.0 if row.exact else EPSILON


def _dual_bound(
    residual: float,
    entries: list[tuple[float, float, int]],  # (a_i, c_i, ub_i) over free vars
) -> float:
    """LP optimum of max{sum c_i x_i : sum a_i x_i <= residual, 0 <= x <= ub}.

    Evaluates the Lagrangian dual at its breakpoints; by weak duality every
    candidate value bounds any feasible assignment, and the minimum over the
    breakpoints attains the LP optimum.
    """
    lambdas = [0.0]
    for a, c, _ in entries:
        if a != 0.0:
            lam = c / a
            if lam > 0.0:
                lambdas.append(lam)
    best = float("inf")
    for lam in lambdas:
        total = lam * residual
        for a, c, ub in entries:
            gain = c - lam * a
            if gain > 0.0:
                total += gain * ub
        if total < best:
            best = total
    return best


def solve(model: IlpModel, config: Optional[SolverConfig] = None) -> SolveOutcome:
    """Exact DFS branch-and-bound over integer multiplicities.

    Deterministic for a given (model, seed); the seed permutes the branching
    order, which can only change *which* optimum is returned under ties.
    """
    config = config or SolverConfig()
    t0 = time.monotonic()
    deadline = t0 + config.timeout_ms / 1000.0 if config.timeout_ms is not None else None

    n = len(model.tuple_ids)
    rows = model.all_rows()
    upper = list(model.upper)

    sense = 0
    internal_c = [0.0] * n
    if model.objective is not None:
        direction, coeffs = model.objective
        sense = 1 if direction == "maximize" else -1
        internal_c = [sense * c for c in coeffs]

    order = list(range(n))
    random.Random(config.seed).shuffle(order)

    # per-row running state: fixed part plus min/max of the free part
    fixed = [0.0] * len(rows)
    min_free = [0.0] * len(rows)
    max_free = [0.0] * len(rows)
    for r, row in enumerate(rows):
        for i in range(n):
            contrib = row.coeffs[i] * upper[i]
            min_free[r] += min(0.0, contrib)
            max_free[r] += max(0.0, contrib)
    count_fixed = 0
    count_free = sum(upper)
    obj_fixed = 0.0

    assignment = [0] * n
    nodes = 0
    best_package: Optional[dict[int, int]] = None
    best_value = float("-inf")
    found_feasible = False

    lo_count = model.count_lower
    hi_count = model.count_upper if model.count_upper is not None else count_free

    def node_feasible() -> bool:
        if count_fixed > hi_count or count_fixed + count_free < lo_count:
            return False
        for r, row in enumerate(rows):
            tol = _row_tolerance(row)
            lo = fixed[r] + min_free[r]
            hi = fixed[r] + max_free[r]
            if row.op == "<=" and lo > row.rhs + tol:
                return False
            if row.op == ">=" and hi < row.rhs - tol:
                return False
            if row.op == "=" and (lo > row.rhs + tol or hi < row.rhs - tol):
                return False
        return True

    def leaf_feasible() -> bool:
        if not (lo_count <= count_fixed <= hi_count):
            return False
        for r, row in enumerate(rows):
            tol = _row_tolerance(row)
            lhs = fixed[r]
            if row.op == "<=" and lhs > row.rhs + tol:
                return False
            if row.op == ">=" and lhs < row.rhs - tol:
                return False
            if row.op == "=" and abs(lhs - row.rhs) > tol:
                return False
        return True

    def node_bound(depth: int) -> float:
        """Upper bound on the internal objective from this node's subtree."""
        free = order[depth:]
        entries_cache = [(i, internal_c[i], upper[i]) for i in free]
        bound = obj_fixed + sum(c * ub for _, c, ub in entries_cache if c > 0.0)
        # tighten with each <=-form row relaxation
        for r, row in enumerate(rows):
            tol = _row_tolerance(row)
            forms = []
            if row.op in ("<=", "="):
                forms.append((1.0, row.rhs + tol))
            if row.op in (">=", "="):
                forms.append((-1.0, -(row.rhs - tol)))
            for sign, rhs in forms:
                entries = [(sign * row.coeffs[i], c, ub) for i, c, ub in entries_cache]
                residual = rhs - sign * fixed[r]
                candidate = obj_fixed + _dual_bound(residual, entries)
                if candidate < bound:
                    bound = candidate
                    if bound <= best_value + 1e-12:
                        return bound
        if hi_count is not None:
            entries = [(1.0, c, ub) for _, c, ub in entries_cache]
            candidate = obj_fixed + _dual_bound(hi_count - count_fixed, entries)
            bound = min(bound, candidate)
        return bound

    def assign(i: int, v: int) -> None:
        nonlocal count_fixed, count_free, obj_fixed
        for r, row in enumerate(rows):
            a = row.coeffs[i]
            if a == 0.0:
                continue
            contrib = a * upper[i]
            fixed[r] += a * v
            min_free[r] -= min(0.0, contrib)
            max_free[r] -= max(0.0, contrib)
        count_fixed += v
        count_free -= upper[i]
        obj_fixed += internal_c[i] * v
        assignment[i] = v

    def unassign(i: int, v: int) -> None:
        nonlocal count_fixed, count_free, obj_fixed
        for r, row in enumerate(rows):
            a = row.coeffs[i]
            if a == 0.0:
                continue
            contrib = a * upper[i]
            fixed[r] -= a * v
            min_free[r] += min(0.0, contrib)
            max_free[r] += max(0.0, contrib)
        count_fixed -= v
        count_free += upper[i]
        obj_fixed -= internal_c[i] * v
        assignment[i] = 0

    def dfs(depth: int) -> bool:
        """Returns True to stop the whole search (feasibility mode)."""
        nonlocal nodes, best_package, best_value, found_feasible
        nodes += 1
        if deadline is not None and time.monotonic() > deadline:
            raise _Timeout
        if not node_feasible():
            return False
        if depth == n:
            if not leaf_feasible():
                return False
            found_feasible = True
            value = obj_fixed
            if sense == 0:
                best_package = {model.tuple_ids[i]: assignment[i] for i in range(n) if assignment[i]}
                best_value = 0.0
                return True  # first feasible leaf wins
            if value > best_value + 1e-12 or best_package is None:
                best_value = value
                best_package = {model.tuple_ids[i]: assignment[i] for i in range(n) if assignment[i]}
            return False
        if sense != 0 and best_package is not None and node_bound(depth) <= best_value + 1e-12:
            return False
        i = order[depth]
        values = range(upper[i], -1, -1) if internal_c[i] > 0.0 else range(upper[i] + 1)
        for v in values:
            assign(i, v)
            try:
                if dfs(depth + 1):
                    return True
            finally:
                unassign(i, v)
        return False

    status = "infeasible"
    timed_out = False
    try:
        dfs(0)
    except _Timeout:
        timed_out = True

    package = None
    objective_value = None
    if best_package is not None:
        package = Package(model.relation_name, best_package)
        if sense != 0:
            objective_value = sense * best_value
            status = "feasible" if timed_out else "optimal"
        else:
            status = "feasible"
    elif timed_out:
        status = "aborted"

    stats = SolveStats(
        nodes=nodes,
        elapsed_ms=(time.monotonic() - t0) * 1000.0,
        disjuncts=1,
        timed_out=timed_out,
    )
    return SolveOutcome(status, package, objective_value, stats)


# ---------------------------------------------------------------------------
# Formula-level solving (one model per DNF disjunct)
# ---------------------------------------------------------------------------

def solve_formula(
    vquery: ValidatedQuery,
    relation: Relation,
    config: Optional[SolverConfig] = None,
    *,
    use_objective: bool = True,
    pinned: Optional[dict[int, int]] = None,
    forbidden_supports: Optional[Sequence[tuple[frozenset[int], frozenset[int]]]] = None,
    bounds: Optional[CardinalityBounds] = None,
) -> SolveOutcome:
    """Solve a query with an arbitrary boolean global formula.

    The formula is normalized to DNF and each disjunct solved separately;
    the best outcome wins (max objective for MAXIMIZE, min for MINIMIZE,
    first feasible disjunct otherwise, earlier disjunct on ties).

    ``pinned`` adds per-tuple lower bounds; ``forbidden_supports`` adds
    no-good cuts, each given as (support set, pinned ids when cut was made).
    """
    config = config or SolverConfig()
    query = vquery.query
    if bounds is None and config.use_pruning:
        bounds = bounds_for(vquery, relation)
    base_ids = filter_base(relation, query.base_predicate)
    branches = normalize_to_dnf(query.global_formula, config.max_dnf)

    deadline_ms = config.timeout_ms
    t0 = time.monotonic()

    has_objective = use_objective and query.objective is not None
    sense = 0
    if has_objective:
        sense = 1 if query.objective.direction == "maximize" else -1

    best: Optional[SolveOutcome] = None
    total_nodes = 0
    timed_out = False
    for branch in branches:
        model = _translate_primitives(
            branch, vquery, relation, bounds, base_ids, use_objective=use_objective
        )
        if pinned:
            index = {t: i for i, t in enumerate(model.tuple_ids)}
            for t, m in sorted(pinned.items()):
                coeffs = [0.0] * len(model.tuple_ids)
                if t not in index:
                    # pinned tuple no longer qualifies; nothing can satisfy it
                    coeffs = tuple(coeffs)
                    model.rows.append(LinearRow(coeffs, ">=", float(m), False, f"pin x{t}"))
                    continue
                coeffs[index[t]] = 1.0
                model.rows.append(LinearRow(tuple(coeffs), ">=", float(m), False, f"pin x{t}"))
        for support, pinned_ids in forbidden_supports or ():
            model.nogood_cuts.append(nogood_row(model.tuple_ids, support, pinned_ids))

        remaining = None
        if deadline_ms is not None:
            remaining = max(0, int(deadline_ms - (time.monotonic() - t0) * 1000.0))
        outcome = solve(model, replace(config, timeout_ms=remaining))
        total_nodes += outcome.stats.nodes
        timed_out = timed_out or outcome.stats.timed_out

        if outcome.package is not None:
            if best is None or best.package is None:
                best = outcome
            elif sense != 0 and outcome.objective_value is not None:
                if sense * (outcome.objective_value - best.objective_value) > 1e-12:
                    best = outcome
            if sense == 0 and best.package is not None:
                break  # first feasible disjunct wins
        elif best is None:
            best = outcome

    if best is None:
        best = SolveOutcome("infeasible")
    stats = SolveStats(
        nodes=total_nodes,
        elapsed_ms=(time.monotonic() - t0) * 1000.0,
        disjuncts=len(branches),
        timed_out=timed_out,
    )
    if best.package is not None:
        status = best.status
        if timed_out and status == "optimal":
            status = "feasible"  # some disjunct was cut short; optimality unproven
    else:
        status = "aborted" if timed_out else "infeasible"
    return SolveOutcome(status, best.package, best.objective_value, stats)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def brute_force_oracle(
    vquery: ValidatedQuery,
    relation: Relation,
    bounds: Optional[CardinalityBounds] = None,
) -> list[tuple[Package, Optional[float]]]:
    """Enumerate every package within the multiplicity caps and keep the
    valid ones, sorted best-objective-first then by lexicographic tuple ids.

    Guard rail: refuses when the sum of variable uppers exceeds 25.
    """
    query = vquery.query
    base_ids = filter_base(relation, query.base_predicate)
    cap = multiplicity_cap(query)
    if len(base_ids) * cap > 25:
        raise SolveError("TOO_LARGE", "instance too large for exhaustive enumeration")

    lo = bounds.lower if bounds else 0
    hi = bounds.upper if bounds and bounds.upper is not None else len(base_ids) * cap

    results: list[tuple[Package, Optional[float]]] = []
    objective = query.objective

    def enumerate_from(pos: int, total: int, chosen: dict[int, int]) -> None:
        remaining_max = (len(base_ids) - pos) * cap
        if total > hi or total + remaining_max < lo:
            return
        if pos == len(base_ids):
            package = Package(relation.name, dict(chosen))
            if not is_valid(package, vquery, relation):
                return
            value = None
            if objective is not None:
                value = eval_aggregate(package, relation, objective.agg)
            results.append((package, value))
            return
        t = base_ids[pos]
        for m in range(cap + 1):
            if m:
                chosen[t] = m
            enumerate_from(pos + 1, total + m, chosen)
        chosen.pop(t, None)

    enumerate_from(0, 0, {})

    if objective is not None:
        flip = -1.0 if objective.direction == "maximize" else 1.0
        results.sort(key=lambda item: (flip * item[1], item[0].key()))
    else:
        results.sort(key=lambda item: item[0].key())
    return results


# ---------------------------------------------------------------------------
# LP-format model dump
# ---------------------------------------------------------------------------

def _lp_terms(coeffs: Sequence[float], names: Sequence[str]) -> str:
    parts: list[str] = []
    for c, name in zip(coeffs, names):
        if c == 0.0:
            continue
        mag = abs(c)
        coeff = "" if mag == 1.0 else (str(int(mag)) if mag == int(mag) else repr(mag)) + " "
        if not parts:
            sign = "- " if c < 0 else ""
        else:
            sign = "- " if c < 0 else "+ "
        parts.append(f"{sign}{coeff}{name}")
    if parts:
        return " ".join(parts)
    return f"0 {names[0]}" if names else "0"


def dump_lp(model: IlpModel) -> str:
    """Serialize the model as LP-format text for external cross-checking."""
    names = [f"x{t}" for t in model.tuple_ids]
    lines: list[str] = [f"\\ package model over relation {model.relation_name}"]
    if model.objective is not None:
        direction, coeffs = model.objective
        lines.append("Maximize" if direction == "maximize" else "Minimize")
        lines.append(" obj: " + _lp_terms(coeffs, names))
    else:
        lines.append("Minimize")
        lines.append(" obj:")
    lines.append("Subject To")
    op_text = {"<=": "<=", ">=": ">=", "=": "="}
    for i, row in enumerate(model.all_rows()):
        rhs = int(row.rhs) if row.rhs == int(row.rhs) else row.rhs
        lines.append(f" c{i}: {_lp_terms(row.coeffs, names)} {op_text[row.op]} {rhs}")
    if names:
        if model.count_lower > 0:
            lines.append(f" card_lo: {_lp_terms([1.0] * len(names), names)} >= {model.count_lower}")
        if model.count_upper is not None:
            lines.append(f" card_hi: {_lp_terms([1.0] * len(names), names)} <= {model.count_upper}")
    lines.append("Bounds")
    for name, ub in zip(names, model.upper):
        lines.append(f" 0 <= {name} <= {ub}")
    lines.append("Generals")
    lines.append(" " + " ".join(names))
    lines.append("End")
    return "\n".join(lines) + "\n"
