"""HTTP/JSON facade over the engine; the contract the web UI consumes.

Error bodies are ``{"code", "message", "position"?}``. Codes are the engine's
error names plus three server-level ones: MALFORMED_BODY (unreadable or
mistyped request body), NO_SUCH_DATASET, and NO_SUCH_SESSION. Packages are
serialized with denormalized row values so clients need no second fetch.
"""

from __future__ import annotations

import threading
import time
from typing import Literal, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .ast import ast_to_json, pretty_print
from .catalog import Catalog, Relation
from .errors import DataError, PaqlError, QuerySyntaxError, SessionError
from .evaluator import Package
from .exploration import (
    ExplorationSession,
    pin,
    replace_unpinned,
    start_session,
    suggest_constraints,
    visual_summary,
)
from .local_search import LocalSearchConfig, local_search
from .parser import parse, parse_and_validate
from .pruning import bounds_for
from .solver import SolveOutcome, SolverConfig, brute_force_oracle, solve_formula

DEFAULT_TIMEOUT_MS = 10_000
SESSION_TTL_S = 30 * 60


class DatasetIn(BaseModel):
    name: str
    csv: str


class ParseIn(BaseModel):
    text: str


class EvaluateIn(BaseModel):
    dataset: str
    text: str
    method: Literal["ilp", "local", "brute"]
    seed: int = 0
    timeoutMs: Optional[int] = None


class SessionIn(BaseModel):
    dataset: str
    text: str
    seed: int = 0


class PinIn(BaseModel):
    tupleId: int
    multiplicity: int = 1


class SuggestIn(BaseModel):
    dataset: str
    column: str
    value: Optional[str | float] = None
    queryText: Optional[str] = None


class SummaryIn(BaseModel):
    dataset: str
    text: str
    maxPackages: int = 10
    seed: int = 0


def _error_body(exc: PaqlError) -> dict:
    body = {"code": exc.code, "message": exc.message}
    if exc.position is not None:
        body["position"] = {"line": exc.position[0], "column": exc.position[1]}
    return body


def _status_for(exc: PaqlError) -> int:
    if exc.code in ("NO_SUCH_DATASET", "NO_SUCH_SESSION"):
        return 404
    if isinstance(exc, QuerySyntaxError):
        return 400
    if isinstance(exc, SessionError):
        return 422 if exc.code == "INFEASIBLE_QUERY" else 409
    if isinstance(exc, DataError):
        return 422 if exc.code in ("NO_SUCH_COLUMN", "NOT_NUMERIC") else 400
    return 422


def _package_json(package: Package, relation: Relation) -> dict:
    tuples = []
    columns = relation.schema.columns
    for t, m in sorted(package.multiplicity.items()):
        values = {col.name: relation.rows[t].values[i] for i, col in enumerate(columns)}
        tuples.append({"id": t, "multiplicity": m, "values": values})
    return {"relation": package.relation_name, "tuples": tuples}


def _dataset_json(relation: Relation) -> dict:
    return {
        "name": relation.name,
        "rows": len(relation.rows),
        "schema": {"columns": [{"name": c.name, "kind": c.kind} for c in relation.schema.columns]},
    }


class _SessionStore:
    """In-memory sessions with idle expiry; one mutation at a time each."""

    def __init__(self, ttl_s: float = SESSION_TTL_S):
        self._ttl = ttl_s
        self._lock = threading.Lock()
        self._entries: dict[str, tuple[ExplorationSession, threading.Lock, float]] = {}

    def put(self, session: ExplorationSession) -> None:
        with self._lock:
            self._entries[session.session_id] = (session, threading.Lock(), time.monotonic())

    def get(self, session_id: str) -> tuple[ExplorationSession, threading.Lock]:
        with self._lock:
            now = time.monotonic()
            expired = [k for k, (_, _, at) in self._entries.items() if now - at > self._ttl]
            for k in expired:
                del self._entries[k]
            entry = self._entries.get(session_id)
            if entry is None:
                raise SessionError("NO_SUCH_SESSION", f"unknown session {session_id!r}")
            session, lock, _ = entry
            self._entries[session_id] = (session, lock, now)
            return session, lock


def create_app(
    catalog: Optional[Catalog] = None,
    *,
    cors_origins: tuple[str, ...] = ("*",),
    default_timeout_ms: int = DEFAULT_TIMEOUT_MS,
    session_ttl_s: float = SESSION_TTL_S,
) -> FastAPI:
    catalog = catalog if catalog is not None else Catalog()
    sessions = _SessionStore(session_ttl_s)
    app = FastAPI(title="package query service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.catalog = catalog

    @app.exception_handler(PaqlError)
    async def paql_error_handler(_request: Request, exc: PaqlError):
        return JSONResponse(status_code=_status_for(exc), content=_error_body(exc))

    @app.exception_handler(RequestValidationError)
    async def body_error_handler(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "MALFORMED_BODY", "message": str(exc.errors()[:1])},
        )

    def relation_or_404(name: str) -> Relation:
        relation = catalog.get(name)
        if relation is None:
            raise SessionError("NO_SUCH_DATASET", f"unknown dataset {name!r}")
        return relation

    # -- datasets ----------------------------------------------------------

    @app.post("/datasets", status_code=201)
    def create_dataset(body: DatasetIn):
        relation = catalog.load(body.name, body.csv)
        return _dataset_json(relation)

    @app.get("/datasets")
    def list_datasets():
        return [_dataset_json(catalog.get(name)) for name in catalog.names()]

    # -- queries -----------------------------------------------------------

    @app.post("/queries/parse")
    def parse_query(body: ParseIn):
        query = parse(body.text)
        return {"ast": ast_to_json(query), "canonicalText": pretty_print(query)}

    @app.post("/queries/evaluate")
    def evaluate(body: EvaluateIn):
        relation = relation_or_404(body.dataset)
        vquery = parse_and_validate(body.text, relation.schema)
        bounds = bounds_for(vquery, relation)
        timeout = body.timeoutMs if body.timeoutMs is not None else default_timeout_ms

        if body.method == "brute":
            results = brute_force_oracle(vquery, relation)
            if not results:
                outcome = SolveOutcome("infeasible")
            else:
                package, value = results[0]
                status = "optimal" if vquery.query.objective is not None else "feasible"
                outcome = SolveOutcome(status, package, value)
            stats = {"validPackages": len(results)}
        elif body.method == "local":
            outcome = local_search(
                vquery, relation, LocalSearchConfig(seed=body.seed)
            )
            stats = outcome.stats.to_json()
        else:
            outcome = solve_formula(
                vquery, relation, SolverConfig(seed=body.seed, timeout_ms=timeout)
            )
            stats = outcome.stats.to_json()
            if outcome.status == "aborted":
                return JSONResponse(
                    status_code=503,
                    content={
                        "code": "TIMEOUT",
                        "message": "solver hit its deadline before finding a package",
                        "stats": stats,
                    },
                )

        response = {
            "status": outcome.status,
            "bounds": bounds.to_json(),
            "stats": stats,
        }
        if outcome.package is not None:
            response["package"] = _package_json(outcome.package, relation)
        if outcome.objective_value is not None:
            response["objective"] = outcome.objective_value
        return response

    # -- exploration sessions ------------------------------------------------

    def session_view(session: ExplorationSession, relation: Relation) -> dict:
        return {
            "sessionId": session.session_id,
            "dataset": session.relation_name,
            "queryText": pretty_print(session.vquery.query),
            "package": _package_json(session.current, relation),
            "pinned": {str(t): m for t, m in sorted(session.pinned.items())},
            "nogoods": len(session.nogoods),
            "seed": session.seed,
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionIn):
        relation = relation_or_404(body.dataset)
        vquery = parse_and_validate(body.text, relation.schema)
        session = start_session(vquery, relation, seed=body.seed)
        sessions.put(session)
        return {
            "sessionId": session.session_id,
            "package": _package_json(session.current, relation),
        }

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session, _lock = sessions.get(session_id)
        return session_view(session, relation_or_404(session.relation_name))

    @app.post("/sessions/{session_id}/pin")
    def pin_tuple(session_id: str, body: PinIn):
        session, lock = sessions.get(session_id)
        relation = relation_or_404(session.relation_name)
        with lock:
            pin(session, body.tupleId, body.multiplicity)
            return session_view(session, relation)

    @app.post("/sessions/{session_id}/replace")
    def replace(session_id: str):
        session, lock = sessions.get(session_id)
        relation = relation_or_404(session.relation_name)
        with lock:
            replace_unpinned(session, relation)
            return {"package": _package_json(session.current, relation)}

    # -- suggestion and summary ----------------------------------------------

    @app.post("/suggest")
    def suggest(body: SuggestIn):
        relation = relation_or_404(body.dataset)
        vquery = None
        if body.queryText:
            vquery = parse_and_validate(body.queryText, relation.schema)
        items = suggest_constraints(relation, body.column, body.value, vquery)
        return [
            {"kind": s.kind, "fragment": s.fragment, "rationale": s.rationale} for s in items
        ]

    @app.post("/summary")
    def summary(body: SummaryIn):
        relation = relation_or_404(body.dataset)
        vquery = parse_and_validate(body.text, relation.schema)
        result = visual_summary(vquery, relation, max_packages=body.maxPackages, seed=body.seed)
        return {
            "dims": {"x": result.x_label, "y": result.y_label},
            "points": [
                {"package": _package_json(p.package, relation), "x": p.x, "y": p.y}
                for p in result.points
            ],
        }

    return app
