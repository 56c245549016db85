"""Package-query engine: parse PaQL, solve exactly or heuristically, explore.

Typical use::

    from paql import catalog, parser, solver

    relation = catalog.load_csv("recipes", open("recipes.csv", "rb").read())
    vquery = parser.parse_and_validate(query_text, relation.schema)
    outcome = solver.solve_formula(vquery, relation)
"""

from .ast import PackageQuery, pretty_print
from .catalog import Catalog, Relation, Schema, column_stats, load_csv, to_csv
from .errors import (
    DataError,
    PaqlError,
    QuerySyntaxError,
    SessionError,
    SolveError,
    ValidationError,
)
from .evaluator import EPSILON, Package, eval_aggregate, filter_base, is_valid
from .exploration import (
    ConstraintSuggestion,
    ExplorationSession,
    pin,
    replace_unpinned,
    start_session,
    suggest_constraints,
    visual_summary,
)
from .local_search import LocalSearchConfig, Replacement, find_replacements
from .parser import ValidatedQuery, parse, parse_and_validate, validate
from .pruning import CardinalityBounds, bounds_for, pruned_space_size
from .solver import (
    IlpModel,
    SolveOutcome,
    SolverConfig,
    brute_force_oracle,
    dump_lp,
    solve,
    solve_formula,
    translate,
)

__all__ = [
    "Catalog",
    "CardinalityBounds",
    "ConstraintSuggestion",
    "DataError",
    "EPSILON",
    "ExplorationSession",
    "IlpModel",
    "LocalSearchConfig",
    "Package",
    "PackageQuery",
    "PaqlError",
    "QuerySyntaxError",
    "Relation",
    "Replacement",
    "Schema",
    "SessionError",
    "SolveError",
    "SolveOutcome",
    "SolverConfig",
    "ValidatedQuery",
    "ValidationError",
    "bounds_for",
    "brute_force_oracle",
    "column_stats",
    "dump_lp",
    "eval_aggregate",
    "filter_base",
    "find_replacements",
    "is_valid",
    "load_csv",
    "parse",
    "parse_and_validate",
    "pin",
    "pretty_print",
    "pruned_space_size",
    "replace_unpinned",
    "solve",
    "solve_formula",
    "start_session",
    "suggest_constraints",
    "to_csv",
    "translate",
    "validate",
    "visual_summary",
]
