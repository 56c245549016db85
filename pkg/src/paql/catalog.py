"""Relations, schemas, and CSV ingestion.

Relations are immutable after load and safe to share across concurrent
evaluations; the :class:`Catalog` serializes its own mutations.
"""

from __future__ import annotations

import csv
import io
import math
import re
import threading
from dataclasses import dataclass
from typing import IO, NamedTuple, Optional, Union

from .ast import BasePredicate, format_number, predicate_matches
from .errors import DataError

NUMERIC = "numeric"
TEXT = "text"

_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def parse_decimal(cell: str) -> Optional[float]:
    """Parse a finite decimal number, or None if the cell is not one.

    Stricter than ``float()``: no inf/nan words, no underscores.
    """
    if not _DECIMAL_RE.match(cell.strip()):
        return None
    value = float(cell)
    return value if math.isfinite(value) else None


@dataclass(frozen=True)
class Column:
    name: str  # stored lower-cased
    kind: str  # NUMERIC or TEXT


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]

    def __post_init__(self):
        if not self.columns:
            raise DataError("EMPTY_SCHEMA", "a schema needs at least one column")
        seen = set()
        for col in self.columns:
            if col.name != col.name.lower():
                raise DataError("BAD_COLUMN_NAME", f"column {col.name!r} must be stored lower-cased")
            if col.name in seen:
                raise DataError("DUPLICATE_COLUMN", f"duplicate column {col.name!r}")
            seen.add(col.name)

    def index_of(self, name: str) -> Optional[int]:
        name = name.lower()
        for i, col in enumerate(self.columns):
            if col.name == name:
                return i
        return None

    def kind_of(self, name: str) -> Optional[str]:
        i = self.index_of(name)
        return None if i is None else self.columns[i].kind

    def index_map(self) -> dict[str, int]:
        return {col.name: i for i, col in enumerate(self.columns)}

    def numeric_columns(self) -> list[str]:
        return [c.name for c in self.columns if c.kind == NUMERIC]


@dataclass(frozen=True)
class TupleRow:
    tuple_id: int
    values: tuple


@dataclass(frozen=True)
class Relation:
    name: str
    schema: Schema
    rows: tuple[TupleRow, ...]

    def __post_init__(self):
        arity = len(self.schema.columns)
        for i, row in enumerate(self.rows):
            if row.tuple_id != i:
                raise DataError("BAD_TUPLE_ID", f"tuple_ids must be dense 0..n-1, got {row.tuple_id} at {i}")
            if len(row.values) != arity:
                raise DataError("RAGGED_ROW", f"row {i} has arity {len(row.values)}, schema has {arity}")

    def value(self, tuple_id: int, column: str):
        idx = self.schema.index_of(column)
        if idx is None:
            raise DataError("NO_SUCH_COLUMN", f"no column {column!r} in relation {self.name!r}")
        return self.rows[tuple_id].values[idx]

    def column_values(self, column: str) -> list:
        idx = self.schema.index_of(column)
        if idx is None:
            raise DataError("NO_SUCH_COLUMN", f"no column {column!r} in relation {self.name!r}")
        return [row.values[idx] for row in self.rows]


def load_csv(name: str, source: Union[bytes, str, IO]) -> Relation:
    """Load an RFC-4180-style CSV (header mandatory, UTF-8) into a Relation.

    Column typing is two-pass: a column is numeric iff every non-empty cell
    parses as a finite decimal. An empty cell in a numeric column cannot be
    converted and raises UNPARSEABLE_NUMERIC. Row numbers in errors are
    1-based CSV record numbers, counting the header as record 1.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    records = list(csv.reader(io.StringIO(text)))
    if not records:
        raise DataError("EMPTY_FILE", f"CSV for relation {name!r} has no header row")

    header = [h.strip().lower() for h in records[0]]
    seen: set[str] = set()
    for col in header:
        if col in seen:
            raise DataError("DUPLICATE_COLUMN", f"duplicate column {col!r} in header")
        seen.add(col)

    data = records[1:]
    for i, rec in enumerate(data):
        if len(rec) != len(header):
            raise DataError(
                "RAGGED_ROW",
                f"row {i + 2} has {len(rec)} fields, header has {len(header)}",
                position=(i + 2, 1),
            )

    # pass 1: infer kinds over all cells
    kinds = []
    for c in range(len(header)):
        numeric = True
        for rec in data:
            cell = rec[c]
            if cell.strip() == "":
                continue
            if parse_decimal(cell) is None:
                numeric = False
                break
        kinds.append(NUMERIC if numeric else TEXT)

    # pass 2: convert
    rows = []
    for i, rec in enumerate(data):
        values = []
        for c, cell in enumerate(rec):
            if kinds[c] == NUMERIC:
                parsed = parse_decimal(cell)
                if parsed is None:
                    raise DataError(
                        "UNPARSEABLE_NUMERIC",
                        f"row {i + 2}, column {header[c]!r}: {cell!r} is not a finite number",
                        position=(i + 2, c + 1),
                    )
                values.append(parsed)
            else:
                values.append(cell)
        rows.append(TupleRow(tuple_id=i, values=tuple(values)))

    schema = Schema(tuple(Column(n, k) for n, k in zip(header, kinds)))
    return Relation(name=name, schema=schema, rows=tuple(rows))


def to_csv(relation: Relation) -> str:
    """Export a Relation back to CSV text; load_csv(to_csv(r)) == r."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([c.name for c in relation.schema.columns])
    for row in relation.rows:
        cells = []
        for col, val in zip(relation.schema.columns, row.values):
            cells.append(format_number(val) if col.kind == NUMERIC else val)
        writer.writerow(cells)
    return out.getvalue()


class ColumnStats(NamedTuple):
    min: Optional[float]
    max: Optional[float]
    count: int


def column_stats(
    relation: Relation,
    column: str,
    predicate: Optional[BasePredicate] = None,
) -> ColumnStats:
    """Min/max/count of a numeric column over predicate-qualified rows.

    With count 0 the min/max are absent (None).
    """
    idx = relation.schema.index_of(column)
    if idx is None:
        raise DataError("NO_SUCH_COLUMN", f"no column {column!r} in relation {relation.name!r}")
    if relation.schema.columns[idx].kind != NUMERIC:
        raise DataError("NOT_NUMERIC", f"column {column!r} is not numeric")

    index_map = relation.schema.index_map()
    lo: Optional[float] = None
    hi: Optional[float] = None
    count = 0
    for row in relation.rows:
        if predicate is not None and not predicate_matches(predicate, row.values, index_map):
            continue
        v = row.values[idx]
        lo = v if lo is None or v < lo else lo
        hi = v if hi is None or v > hi else hi
        count += 1
    return ColumnStats(lo, hi, count)


class Catalog:
    """Named relations; loads are serialized, reads are lock-free."""

    def __init__(self):
        self._relations: dict[str, Relation] = {}
        self._lock = threading.Lock()

    def load(self, name: str, source: Union[bytes, str, IO]) -> Relation:
        relation = load_csv(name, source)
        with self._lock:
            self._relations[name] = relation
        return relation

    def add(self, relation: Relation) -> None:
        with self._lock:
            self._relations[relation.name] = relation

    def get(self, name: str) -> Optional[Relation]:
        return self._relations.get(name)

    def names(self) -> list[str]:
        return sorted(self._relations)

    def drop(self, name: str) -> None:
        with self._lock:
            self._relations.pop(name, None)
