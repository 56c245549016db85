"""Package-query text: lexer, parser, and schema validation.

The grammar (keywords case-insensitive, ``--`` line comments):

    query  := SELECT PACKAGE '(' ident ')' AS ident FROM ident ident
              { REPEAT int | WHERE bpred | SUCH THAT gform
              | (MAXIMIZE|MINIMIZE) agg }
    bpred  := boolean tree of ``[alias.]column cmp literal``
    gform  := boolean tree of ``agg cmp number`` / ``agg BETWEEN a AND b``
    agg    := COUNT '(' '*' ')' | (SUM|AVG) '(' [alias.]column ')'

Clauses may repeat only once each; a second occurrence is DUPLICATE_CLAUSE.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .ast import (
    Aggregate,
    And,
    BaseAtom,
    BasePredicate,
    GlobalBetween,
    GlobalComparison,
    GlobalFormula,
    Not,
    Objective,
    Or,
    PackageQuery,
)
from .catalog import NUMERIC, Schema
from .errors import QuerySyntaxError, ValidationError

KEYWORDS = {
    "SELECT", "PACKAGE", "AS", "FROM", "REPEAT", "WHERE", "SUCH", "THAT",
    "AND", "OR", "NOT", "BETWEEN", "MAXIMIZE", "MINIMIZE",
    "COUNT", "SUM", "AVG", "MIN", "MAX",
}

_SYMBOLS = ("<>", "<=", ">=", "=", "<", ">", "(", ")", "*", ".", ",", "-")


@dataclass(frozen=True)
class Token:
    kind: str  # keyword name, "IDENT", "NUMBER", "STRING", a symbol, or "EOF"
    value: object
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, col = 0, 1, 1
    n = len(text)

    def err(message: str, expected=()):
        raise QuerySyntaxError(message, (line, col), expected)

    while pos < n:
        ch = text[pos]
        if ch == "\n":
            pos, line, col = pos + 1, line + 1, 1
            continue
        if ch.isspace():
            pos, col = pos + 1, col + 1
            continue
        if text.startswith("--", pos):
            while pos < n and text[pos] != "\n":
                pos += 1
            continue
        start_line, start_col = line, col
        if ch == "'":
            value = []
            pos, col = pos + 1, col + 1
            while True:
                if pos >= n:
                    raise QuerySyntaxError(
                        "unterminated string literal", (start_line, start_col), ("'",)
                    )
                if text[pos] == "'":
                    if pos + 1 < n and text[pos + 1] == "'":
                        value.append("'")
                        pos, col = pos + 2, col + 2
                        continue
                    pos, col = pos + 1, col + 1
                    break
                if text[pos] == "\n":
                    line, col = line + 1, 0
                value.append(text[pos])
                pos, col = pos + 1, col + 1
            tokens.append(Token("STRING", "".join(value), start_line, start_col))
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < n and text[pos + 1].isdigit()):
            j = pos
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lexeme = text[pos:j]
            try:
                number = float(lexeme)
            except ValueError:
                raise QuerySyntaxError(
                    f"bad number {lexeme!r}", (start_line, start_col), ("number",)
                ) from None
            tokens.append(Token("NUMBER", number, start_line, start_col))
            col += j - pos
            pos = j
            continue
        if ch.isalpha() or ch == "_":
            j = pos
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[pos:j]
            upper = word.upper()
            kind = upper if upper in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, start_line, start_col))
            col += j - pos
            pos = j
            continue
        for sym in _SYMBOLS:
            if text.startswith(sym, pos):
                tokens.append(Token(sym, sym, start_line, start_col))
                pos += len(sym)
                col += len(sym)
                break
        else:
            err(f"unexpected character {ch!r}")
    tokens.append(Token("EOF", None, line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def current(self) -> Token:
        return self.tokens[self.pos]

    def check(self, *kinds: str) -> bool:
        return self.current().kind in kinds

    def advance(self) -> Token:
        tok = self.current()
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def accept(self, *kinds: str) -> Optional[Token]:
        if self.check(*kinds):
            return self.advance()
        return None

    def expect(self, kind: str, what: Optional[str] = None) -> Token:
        tok = self.current()
        if tok.kind != kind:
            found = tok.value if tok.kind in ("IDENT", "NUMBER", "STRING") else tok.kind
            raise QuerySyntaxError(
                f"expected {what or kind}, found {found}",
                (tok.line, tok.column),
                (what or kind,),
            )
        return self.advance()

    def fail(self, message: str, expected=()) -> "QuerySyntaxError":
        tok = self.current()
        return QuerySyntaxError(message, (tok.line, tok.column), expected)

    # -- grammar -----------------------------------------------------------

    def parse_query(self) -> PackageQuery:
        self.expect("SELECT")
        self.expect("PACKAGE")
        self.expect("(")
        package_var = self.expect("IDENT", "package variable").value
        self.expect(")")
        self.expect("AS")
        pkg_alias_tok = self.expect("IDENT", "package alias")
        self.expect("FROM")
        relation_name = self.expect("IDENT", "relation name").value
        rel_alias_tok = self.expect("IDENT", "relation alias")

        if rel_alias_tok.value != package_var:
            raise QuerySyntaxError(
                f"PACKAGE({package_var}) does not name the relation alias {rel_alias_tok.value!r}",
                (rel_alias_tok.line, rel_alias_tok.column),
                (str(package_var),),
            )
        if pkg_alias_tok.value == rel_alias_tok.value:
            raise QuerySyntaxError(
                f"package alias {pkg_alias_tok.value!r} must differ from the relation alias",
                (pkg_alias_tok.line, pkg_alias_tok.column),
                ("distinct alias",),
            )

        self.relation_alias = rel_alias_tok.value
        self.package_alias = pkg_alias_tok.value

        repeat: Optional[int] = None
        base: Optional[BasePredicate] = None
        formula: Optional[GlobalFormula] = None
        objective: Optional[Objective] = None

        while not self.check("EOF"):
            tok = self.current()
            if tok.kind == "REPEAT":
                if repeat is not None:
                    raise QuerySyntaxError(
                        "duplicate REPEAT clause", (tok.line, tok.column), code="DUPLICATE_CLAUSE"
                    )
                self.advance()
                num_tok = self.expect("NUMBER", "repeat count")
                value = num_tok.value
                if value != int(value) or value < 0:
                    raise QuerySyntaxError(
                        f"REPEAT needs an integer >= 0, found {value}",
                        (num_tok.line, num_tok.column),
                        ("non-negative integer",),
                    )
                repeat = int(value)
            elif tok.kind == "WHERE":
                if base is not None:
                    raise QuerySyntaxError(
                        "duplicate WHERE clause", (tok.line, tok.column), code="DUPLICATE_CLAUSE"
                    )
                self.advance()
                base = self.parse_bool(self.parse_base_atom)
            elif tok.kind == "SUCH":
                if formula is not None:
                    raise QuerySyntaxError(
                        "duplicate SUCH THAT clause", (tok.line, tok.column), code="DUPLICATE_CLAUSE"
                    )
                self.advance()
                self.expect("THAT")
                formula = self.parse_bool(self.parse_global_atom)
            elif tok.kind in ("MAXIMIZE", "MINIMIZE"):
                if objective is not None:
                    raise QuerySyntaxError(
                        "duplicate objective clause", (tok.line, tok.column), code="DUPLICATE_CLAUSE"
                    )
                self.advance()
                objective = Objective(tok.kind.lower(), self.parse_aggregate())
            else:
                raise self.fail(
                    f"unexpected {tok.value if tok.kind == 'IDENT' else tok.kind}",
                    ("REPEAT", "WHERE", "SUCH THAT", "MAXIMIZE", "MINIMIZE", "EOF"),
                )

        return PackageQuery(
            relation_name=relation_name,
            relation_alias=self.relation_alias,
            package_alias=self.package_alias,
            repeat=repeat,
            base_predicate=base,
            global_formula=formula,
            objective=objective,
        )

    def parse_bool(self, atom_parser) -> BasePredicate:
        node = self.parse_and(atom_parser)
        while self.accept("OR"):
            node = Or(node, self.parse_and(atom_parser))
        return node

    def parse_and(self, atom_parser) -> BasePredicate:
        node = self.parse_unary(atom_parser)
        while self.accept("AND"):
            node = And(node, self.parse_unary(atom_parser))
        return node

    def parse_unary(self, atom_parser) -> BasePredicate:
        if self.accept("NOT"):
            return Not(self.parse_unary(atom_parser))
        if self.check("("):
            nxt = self.tokens[self.pos + 1]
            if nxt.kind == "SELECT":
                raise QuerySyntaxError(
                    "sub-queries are not supported here",
                    (nxt.line, nxt.column),
                    code="UNSUPPORTED_FEATURE",
                )
            self.advance()
            node = self.parse_bool(atom_parser)
            self.expect(")")
            return node
        return atom_parser()

    def parse_base_atom(self) -> BaseAtom:
        tok = self.current()
        if tok.kind != "IDENT":
            raise self.fail(
                f"expected a column reference, found {tok.value if tok.kind == 'IDENT' else tok.kind}",
                ("column",),
            )
        first = self.advance()
        column = first.value
        if self.accept("."):
            if first.value != self.relation_alias:
                raise QuerySyntaxError(
                    f"unknown qualifier {first.value!r}; base constraints use {self.relation_alias!r}",
                    (first.line, first.column),
                    (str(self.relation_alias),),
                )
            column = self.expect("IDENT", "column name").value
        op_tok = self.current()
        if op_tok.kind not in ("=", "<>", "<", "<=", ">", ">="):
            raise self.fail("expected a comparator", ("=", "<>", "<", "<=", ">", ">="))
        self.advance()
        value = self.parse_literal()
        return BaseAtom(column=column, op=op_tok.kind, value=value)

    def parse_literal(self) -> Union[float, str]:
        if self.check("STRING"):
            return self.advance().value
        return self.parse_signed_number()

    def parse_global_atom(self) -> BasePredicate:
        agg = self.parse_aggregate()
        if self.accept("BETWEEN"):
            low = self.parse_signed_number()
            self.expect("AND")
            high = self.parse_signed_number()
            return GlobalBetween(agg=agg, low=low, high=high)
        op_tok = self.current()
        if op_tok.kind not in ("=", "<>", "<", "<=", ">", ">="):
            raise self.fail("expected a comparator or BETWEEN", ("=", "<>", "<", "<=", ">", ">=", "BETWEEN"))
        self.advance()
        value = self.parse_signed_number()
        return GlobalComparison(agg=agg, op=op_tok.kind, value=value)

    def parse_signed_number(self) -> float:
        sign = -1.0 if self.accept("-") else 1.0
        tok = self.current()
        if tok.kind == "NUMBER":
            self.advance()
            return sign * float(tok.value)
        raise self.fail("expected a number", ("number",))

    def parse_aggregate(self) -> Aggregate:
        tok = self.current()
        if tok.kind == "COUNT":
            self.advance()
            self.expect("(")
            self.expect("*")
            self.expect(")")
            return Aggregate("count", None)
        if tok.kind in ("SUM", "AVG", "MIN", "MAX"):
            self.advance()
            self.expect("(")
            first = self.expect("IDENT", "column name")
            column = first.value
            if self.accept("."):
                if first.value != self.package_alias:
                    raise QuerySyntaxError(
                        f"unknown qualifier {first.value!r}; aggregates use {self.package_alias!r}",
                        (first.line, first.column),
                        (str(self.package_alias),),
                    )
                column = self.expect("IDENT", "column name").value
            self.expect(")")
            return Aggregate(tok.kind.lower(), column)
        raise self.fail("expected an aggregate", ("COUNT(*)", "SUM", "AVG"))


def parse(query_text: str) -> PackageQuery:
    """Parse query text into a :class:`PackageQuery` AST.

    Raises :class:`QuerySyntaxError` (code SYNTAX_ERROR, DUPLICATE_CLAUSE, or
    UNSUPPORTED_FEATURE) with a 1-based (line, column) position.
    """
    parser = _Parser(tokenize(query_text))
    return parser.parse_query()


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidatedQuery:
    """A parsed query resolved against a schema; column names lower-cased."""

    query: PackageQuery
    schema: Schema


def _validate_base(pred: BasePredicate, schema: Schema) -> BasePredicate:
    if isinstance(pred, Not):
        return Not(_validate_base(pred.item, schema))
    if isinstance(pred, And):
        return And(_validate_base(pred.left, schema), _validate_base(pred.right, schema))
    if isinstance(pred, Or):
        return Or(_validate_base(pred.left, schema), _validate_base(pred.right, schema))
    assert isinstance(pred, BaseAtom)
    column = pred.column.lower()
    kind = schema.kind_of(column)
    if kind is None:
        raise ValidationError("NO_SUCH_COLUMN", f"no column {pred.column!r}")
    if kind == NUMERIC:
        if not isinstance(pred.value, float):
            raise ValidationError(
                "TYPE_MISMATCH", f"column {column!r} is numeric but compared to a string"
            )
    else:
        if not isinstance(pred.value, str):
            raise ValidationError(
                "TYPE_MISMATCH", f"column {column!r} is text but compared to a number"
            )
        if pred.op not in ("=", "<>"):
            raise ValidationError(
                "TYPE_MISMATCH", f"text column {column!r} only supports = and <>"
            )
    return BaseAtom(column=column, op=pred.op, value=pred.value)


def _validate_aggregate(agg: Aggregate, schema: Schema) -> Aggregate:
    if agg.func in ("min", "max"):
        raise ValidationError(
            "UNSUPPORTED_FEATURE",
            f"{agg.func.upper()} over a package is non-linear and not supported",
        )
    if agg.func == "count":
        return agg
    column = (agg.column or "").lower()
    kind = schema.kind_of(column)
    if kind is None:
        raise ValidationError("NO_SUCH_COLUMN", f"no column {agg.column!r}")
    if kind != NUMERIC:
        raise ValidationError("TYPE_MISMATCH", f"cannot aggregate text column {column!r}")
    return Aggregate(agg.func, column)


def _validate_formula(node: GlobalFormula, schema: Schema) -> GlobalFormula:
    if isinstance(node, Not):
        return Not(_validate_formula(node.item, schema))
    if isinstance(node, And):
        return And(_validate_formula(node.left, schema), _validate_formula(node.right, schema))
    if isinstance(node, Or):
        return Or(_validate_formula(node.left, schema), _validate_formula(node.right, schema))
    if isinstance(node, GlobalBetween):
        if node.low > node.high:
            raise ValidationError(
                "EMPTY_BETWEEN", f"BETWEEN {node.low} AND {node.high} is empty (low > high)"
            )
        return GlobalBetween(_validate_aggregate(node.agg, schema), node.low, node.high)
    assert isinstance(node, GlobalComparison)
    return GlobalComparison(_validate_aggregate(node.agg, schema), node.op, node.value)


def validate(query: PackageQuery, schema: Schema) -> ValidatedQuery:
    """Resolve column references and check typing rules.

    Raises :class:`ValidationError` with code NO_SUCH_COLUMN, TYPE_MISMATCH,
    EMPTY_BETWEEN, or UNSUPPORTED_FEATURE.
    """
    base = _validate_base(query.base_predicate, schema) if query.base_predicate else None
    formula = _validate_formula(query.global_formula, schema) if query.global_formula else None
    objective = None
    if query.objective is not None:
        agg = query.objective.agg
        if agg.func not in ("count", "sum"):
            raise ValidationError(
                "UNSUPPORTED_FEATURE",
                f"objective must be COUNT(*) or SUM, not {agg.func.upper()}",
            )
        objective = Objective(query.objective.direction, _validate_aggregate(agg, schema))
    normalized = PackageQuery(
        relation_name=query.relation_name,
        relation_alias=query.relation_alias,
        package_alias=query.package_alias,
        repeat=query.repeat,
        base_predicate=base,
        global_formula=formula,
        objective=objective,
    )
    return ValidatedQuery(query=normalized, schema=schema)


def parse_and_validate(query_text: str, schema: Schema) -> ValidatedQuery:
    return validate(parse(query_text), schema)
