"""Batch entry point: evaluate queries, print bounds, run the server.

Exit codes: 0 optimal/feasible, 1 infeasible, 2 aborted or timed out,
64 usage error, 65 data error, 66 query parse/validation error.
JSON output is the stable machine surface (and omits wall-clock timings so
identical inputs produce identical bytes); table output is for humans.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path
from typing import Optional

import click

from .catalog import Catalog, load_csv
from .errors import DataError, PaqlError, QuerySyntaxError, ValidationError
from .evaluator import Package
from .local_search import LocalSearchConfig, local_search
from .parser import parse_and_validate
from .pruning import bounds_for, pruned_space_size
from .solver import (
    SolveOutcome,
    SolverConfig,
    brute_force_oracle,
    dump_lp,
    solve_formula,
    translate,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_ABORTED = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_QUERY = 66


def _load_inputs(data_path: str, query_path: str):
    relation = load_csv(Path(data_path).stem, Path(data_path).read_bytes())
    query_text = Path(query_path).read_text(encoding="utf-8")
    vquery = parse_and_validate(query_text, relation.schema)
    return relation, vquery


def _package_rows(package: Package, relation) -> list[str]:
    header = [c.name for c in relation.schema.columns]
    lines = ["  mult | " + " | ".join(header)]
    for t, m in sorted(package.multiplicity.items()):
        cells = [str(v) for v in relation.rows[t].values]
        lines.append(f"  x{m}   | " + " | ".join(cells))
    return lines


def _outcome_json(outcome: SolveOutcome, bounds) -> str:
    body = {
        "status": outcome.status,
        "package": outcome.package.to_json() if outcome.package else None,
        "objective": outcome.objective_value,
        "bounds": bounds.to_json(),
        "stats": outcome.stats.to_json(include_time=False),
    }
    return json.dumps(body, sort_keys=True)


@click.group()
def cli():
    """Package queries over CSV relations."""


@cli.command("eval")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--query", "query_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["ilp", "local", "brute"]), default="ilp")
@click.option("--seed", type=int, default=0)
@click.option("--timeout-ms", type=int, default=None)
@click.option("--dump-lp", "lp_path", type=click.Path(dir_okay=False), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
def eval_cmd(data_path, query_path, method, seed, timeout_ms, lp_path, fmt):
    """Evaluate a query against a CSV file and print the outcome."""
    relation, vquery = _load_inputs(data_path, query_path)
    bounds = bounds_for(vquery, relation)

    if lp_path:
        model = translate(vquery, relation, bounds)
        Path(lp_path).write_text(dump_lp(model), encoding="utf-8")

    if method == "brute":
        results = brute_force_oracle(vquery, relation)
        if results:
            package, value = results[0]
            status = "optimal" if vquery.query.objective is not None else "feasible"
            outcome = SolveOutcome(status, package, value)
        else:
            outcome = SolveOutcome("infeasible")
    elif method == "local":
        outcome = local_search(vquery, relation, LocalSearchConfig(seed=seed))
    else:
        outcome = solve_formula(
            vquery, relation, SolverConfig(seed=seed, timeout_ms=timeout_ms)
        )

    if fmt == "json":
        click.echo(_outcome_json(outcome, bounds))
    else:
        click.echo(f"status: {outcome.status}")
        if outcome.objective_value is not None:
            click.echo(f"objective: {outcome.objective_value:g}")
        click.echo(f"cardinality bounds: [{bounds.lower}, {bounds.upper}]")
        if outcome.package is not None:
            click.echo("package:")
            for line in _package_rows(outcome.package, relation):
                click.echo(line)

    if outcome.status in ("optimal", "feasible"):
        sys.exit(EXIT_OK)
    sys.exit(EXIT_INFEASIBLE if outcome.status == "infeasible" else EXIT_ABORTED)


@cli.command("bounds")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--query", "query_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="table")
def bounds_cmd(data_path, query_path, fmt):
    """Print cardinality bounds and, under set semantics, the search-space size."""
    relation, vquery = _load_inputs(data_path, query_path)
    bounds = bounds_for(vquery, relation)
    from .evaluator import filter_base

    n = len(filter_base(relation, vquery.query.base_predicate))
    space = pruned_space_size(n, bounds) if vquery.query.repeat is None else None

    if fmt == "json":
        body = {"bounds": bounds.to_json(), "qualifyingTuples": n, "searchSpace": space}
        click.echo(json.dumps(body, sort_keys=True))
    else:
        click.echo(f"qualifying tuples: {n}")
        click.echo(f"cardinality bounds: [{bounds.lower}, {bounds.upper}]")
        for atom in bounds.per_atom:
            hi = "unbounded" if atom.upper is None else atom.upper
            click.echo(f"  {atom.atom}: [{atom.lower}, {hi}]")
        if space is not None:
            click.echo(f"pruned search space: {space}")
    sys.exit(EXIT_OK)


@cli.command("serve")
@click.option("--addr", default=None, help="HOST:PORT (default $PAQL_ADDR or 127.0.0.1:8000)")
@click.option(
    "--data-dir",
    type=click.Path(exists=True, file_okay=False),
    default=None,
    help="preload every *.csv in this directory",
)
@click.option(
    "--cors-origin",
    "cors_origins",
    multiple=True,
    help="allowed UI origin, repeatable (default $PAQL_UI_ORIGIN or *)",
)
def serve_cmd(addr: Optional[str], data_dir: Optional[str], cors_origins: tuple[str, ...]):
    """Run the HTTP service."""
    import uvicorn

    from .server import create_app

    addr = addr or os.environ.get("PAQL_ADDR") or "127.0.0.1:8000"
    host, _, port_text = addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError(f"--addr must be HOST:PORT, got {addr!r}")
    if not cors_origins:
        cors_origins = (os.environ.get("PAQL_UI_ORIGIN") or "*",)

    catalog = Catalog()
    if data_dir:
        for csv_path in sorted(Path(data_dir).glob("*.csv")):
            catalog.load(csv_path.stem, csv_path.read_bytes())
            click.echo(f"loaded dataset {csv_path.stem!r}", err=True)

    uvicorn.run(create_app(catalog, cors_origins=cors_origins), host=host, port=int(port_text))


def main() -> None:
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(EXIT_USAGE)
    except (QuerySyntaxError, ValidationError) as exc:
        position = f" at {exc.position[0]}:{exc.position[1]}" if exc.position else ""
        click.echo(f"query error [{exc.code}]{position}: {exc.message}", err=True)
        sys.exit(EXIT_QUERY)
    except DataError as exc:
        click.echo(f"data error [{exc.code}]: {exc.message}", err=True)
        sys.exit(EXIT_DATA)
    except PaqlError as exc:
        click.echo(f"error [{exc.code}]: {exc.message}", err=True)
        sys.exit(EXIT_DATA)


if __name__ == "__main__":
    main()
