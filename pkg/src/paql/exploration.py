"""Adaptive exploration sessions, constraint suggestions, visual summaries.

A session starts from a sample package (feasibility solve, objective
stripped), lets the user pin good tuples, and re-solves for the rest under
accumulating no-good cuts so repeated requests enumerate distinct samples.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, field
from typing import Optional

from .ast import Aggregate, format_number, format_text, iter_atoms, render_aggregate
from .catalog import NUMERIC, Relation
from .errors import DataError, SessionError
from .evaluator import Package, eval_aggregate
from .parser import ValidatedQuery
from .pruning import bounds_for
from .solver import SolverConfig, solve_formula


@dataclass(frozen=True)
class NogoodCut:
    """Forbids the unpinned support set recorded when the cut was made."""

    support: frozenset[int]
    pinned_ids: frozenset[int]


@dataclass
class ExplorationSession:
    session_id: str
    vquery: ValidatedQuery
    relation_name: str
    current: Package
    pinned: dict[int, int] = field(default_factory=dict)
    nogoods: list[NogoodCut] = field(default_factory=list)
    seed: int = 0
    history: list[tuple[str, Package]] = field(default_factory=list)


def start_session(vquery: ValidatedQuery, relation: Relation, seed: int = 0) -> ExplorationSession:
    """Open a session on a sample package (first feasible, not the optimum)."""
    outcome = solve_formula(
        vquery, relation, SolverConfig(seed=seed), use_objective=False
    )
    if outcome.package is None:
        raise SessionError("INFEASIBLE_QUERY", "no package satisfies the query")
    return ExplorationSession(
        session_id=uuid.uuid4().hex,
        vquery=vquery,
        relation_name=relation.name,
        current=outcome.package,
        seed=seed,
    )


def pin(session: ExplorationSession, tuple_id: int, multiplicity: int = 1) -> ExplorationSession:
    """Pin ``multiplicity`` occurrences of a tuple in the current package.

    Multiplicity 0 clears the pin (the toggle-off case); both directions are
    idempotent.
    """
    if multiplicity == 0:
        if tuple_id in session.pinned:
            del session.pinned[tuple_id]
            session.history.append((f"unpin {tuple_id}", session.current.copy()))
        return session
    have = session.current.multiplicity.get(tuple_id, 0)
    if multiplicity < 0 or have < multiplicity:
        raise SessionError(
            "NOT_IN_PACKAGE",
            f"tuple {tuple_id} has {have} occurrence(s); cannot pin {multiplicity}",
        )
    if session.pinned.get(tuple_id) != multiplicity:
        session.pinned[tuple_id] = multiplicity
        session.history.append((f"pin {tuple_id} x{multiplicity}", session.current.copy()))
    return session


def replace_unpinned(
    session: ExplorationSession, relation: Relation, config: Optional[SolverConfig] = None
) -> ExplorationSession:
    """Re-solve for the unpinned occurrences, excluding every earlier sample.

    On success the new sample differs from the current one in at least one
    unpinned occurrence and all pins are preserved; NO_ALTERNATIVE leaves the
    session unchanged.
    """
    cut = NogoodCut(
        support=frozenset(
            t for t, m in session.current.multiplicity.items() if m > session.pinned.get(t, 0)
        ),
        pinned_ids=frozenset(session.pinned),
    )
    config = config or SolverConfig(seed=session.seed)
    outcome = solve_formula(
        session.vquery,
        relation,
        config,
        use_objective=False,
        pinned=dict(session.pinned),
        forbidden_supports=[(c.support, c.pinned_ids) for c in session.nogoods + [cut]],
    )
    if outcome.package is None:
        raise SessionError(
            "NO_ALTERNATIVE", "no other package satisfies the query under the current pins"
        )
    session.history.append(("replace", session.current.copy()))
    session.nogoods.append(cut)
    session.current = outcome.package
    return session


# ---------------------------------------------------------------------------
# Constraint suggestion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintSuggestion:
    kind: str  # "base_predicate" | "global_atom" | "objective"
    fragment: str
    rationale: str


def suggest_constraints(
    relation: Relation,
    column: str,
    selected_value=None,
    query: Optional[ValidatedQuery] = None,
    package: Optional[Package] = None,
) -> list[ConstraintSuggestion]:
    """Constraints and objectives anchored on a column (and a selected cell).

    Ordered base predicates, then global constraints, then objectives. The
    SUM cap scales the selected value by the expected package size: the
    midpoint of the cardinality bounds when available, else the size of the
    package in hand.
    """
    kind = relation.schema.kind_of(column)
    if kind is None:
        raise DataError("NO_SUCH_COLUMN", f"no column {column!r} in relation {relation.name!r}")
    column = column.lower()
    alias_r = query.query.relation_alias if query else "R"
    alias_p = query.query.package_alias if query else "P"

    out: list[ConstraintSuggestion] = []
    if kind == NUMERIC:
        if selected_value is not None:
            v = float(selected_value)
            out.append(
                ConstraintSuggestion(
                    "base_predicate",
                    f"{alias_r}.{column} <= {format_number(v)}",
                    f"keep every tuple's {column} at or below {format_number(v)}",
                )
            )
            out.append(
                ConstraintSuggestion(
                    "base_predicate",
                    f"{alias_r}.{column} >= {format_number(v)}",
                    f"keep every tuple's {column} at or above {format_number(v)}",
                )
            )
            expected = None
            if query is not None:
                bounds = bounds_for(query, relation)
                if bounds.upper is not None and bounds.upper >= bounds.lower:
                    expected = max(1, (bounds.lower + bounds.upper) // 2)
            if expected is None and package is not None:
                expected = max(1, package.count())
            if expected is not None:
                out.append(
                    ConstraintSuggestion(
                        "global_atom",
                        f"SUM({alias_p}.{column}) <= {format_number(v * expected)}",
                        f"cap the package total at {expected} tuples worth of the selected {column}",
                    )
                )
        out.append(
            ConstraintSuggestion(
                "objective",
                f"MINIMIZE SUM({alias_p}.{column})",
                f"prefer packages with the least total {column}",
            )
        )
        out.append(
            ConstraintSuggestion(
                "objective",
                f"MAXIMIZE SUM({alias_p}.{column})",
                f"prefer packages with the most total {column}",
            )
        )
    else:
        if selected_value is not None:
            v = format_text(str(selected_value))
            out.append(
                ConstraintSuggestion(
                    "base_predicate",
                    f"{alias_r}.{column} = {v}",
                    f"only tuples whose {column} is {v}",
                )
            )
            out.append(
                ConstraintSuggestion(
                    "base_predicate",
                    f"{alias_r}.{column} <> {v}",
                    f"exclude tuples whose {column} is {v}",
                )
            )
    return out


# ---------------------------------------------------------------------------
# Visual summary
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryPoint:
    package: Package
    x: float
    y: float


@dataclass(frozen=True)
class VisualSummary:
    x_dim: Aggregate
    y_dim: Aggregate
    x_label: str
    y_label: str
    points: tuple[SummaryPoint, ...]


def _summary_dims(vquery: ValidatedQuery, relation: Relation) -> tuple[Aggregate, Aggregate]:
    query = vquery.query
    count = Aggregate("count", None)
    y = query.objective.agg if query.objective is not None else count
    x = None
    for atom in iter_atoms(query.global_formula):
        agg = atom.agg  # type: ignore[union-attr]
        if agg.func == "sum" and agg != y:
            x = agg
            break
    if x is None and y != count:
        x = count
    if x is None:
        numeric = relation.schema.numeric_columns()
        x = Aggregate("sum", numeric[0]) if numeric else count
    return x, y


def visual_summary(
    vquery: ValidatedQuery,
    relation: Relation,
    max_packages: int,
    seed: int = 0,
) -> VisualSummary:
    """Lay out up to ``max_packages`` distinct valid packages on two dims.

    The first point comes from the full solve (optimal when an objective
    exists); later points are feasibility solves under accumulating no-good
    cuts, so the points are pairwise distinct.
    """
    x_dim, y_dim = _summary_dims(vquery, relation)
    config = SolverConfig(seed=seed)

    packages: list[Package] = []
    cuts: list[tuple[frozenset[int], frozenset[int]]] = []
    outcome = solve_formula(vquery, relation, config)
    if outcome.package is None:
        raise SessionError("INFEASIBLE_QUERY", "no package satisfies the query")
    packages.append(outcome.package)
    while len(packages) < max_packages:
        cuts.append((packages[-1].support(), frozenset()))
        nxt = solve_formula(
            vquery, relation, config, use_objective=False, forbidden_supports=cuts
        )
        if nxt.package is None:
            break
        packages.append(nxt.package)

    points = tuple(
        SummaryPoint(
            pkg,
            eval_aggregate(pkg, relation, x_dim),
            eval_aggregate(pkg, relation, y_dim),
        )
        for pkg in packages
    )
    return VisualSummary(
        x_dim=x_dim,
        y_dim=y_dim,
        x_label=render_aggregate(x_dim),
        y_label=render_aggregate(y_dim),
        points=points,
    )
