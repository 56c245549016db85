/**
 * Clause-aware manipulation of canonical query text.
 *
 * The server's /queries/parse returns a canonical single-line rendering with
 * uppercase keywords and a fixed clause order; these helpers split it, turn
 * constraint clauses into chip fragments, and splice accepted suggestions
 * back in. Every rewrite is re-validated against the server before use, so
 * the only job here is producing text the parser will accept.
 */

import type { Suggestion } from "./api.js";

export interface QueryParts {
  head: string; // SELECT PACKAGE(x) AS y FROM name x
  repeat?: string; // the count, e.g. "2"
  where?: string;
  suchThat?: string;
  objective?: string; // full clause including MAXIMIZE/MINIMIZE
}

const CLAUSE_KEYWORDS = ["REPEAT", "WHERE", "SUCH THAT", "MAXIMIZE", "MINIMIZE"] as const;

function isWordChar(ch: string): boolean {
  return /[A-Za-z0-9_]/.test(ch);
}

/** Index just past a single-quoted literal starting at `start` ("" escapes). */
function skipString(text: string, start: number): number {
  let i = start + 1;
  while (i < text.length) {
    if (text[i] === "'") {
      if (text[i + 1] === "'") {
        i += 2;
        continue;
      }
      return i + 1;
    }
    i += 1;
  }
  return i;
}

function keywordAt(text: string, i: number): string | null {
  for (const keyword of CLAUSE_KEYWORDS) {
    if (text.substring(i, i + keyword.length).toUpperCase() !== keyword) continue;
    const before = i === 0 ? "" : text[i - 1]!;
    const after = text[i + keyword.length] ?? "";
    if ((before === "" || !isWordChar(before)) && !isWordChar(after)) {
      return keyword;
    }
  }
  return null;
}

/** Split canonical text into clauses (top level only; quote-aware). */
export function splitQuery(text: string): QueryParts {
  const marks: { keyword: string; start: number }[] = [];
  let i = 0;
  while (i < text.length) {
    const ch = text[i]!;
    if (ch === "'") {
      i = skipString(text, i);
      continue;
    }
    const keyword = keywordAt(text, i);
    if (keyword) {
      marks.push({ keyword, start: i });
      i += keyword.length;
      continue;
    }
    i += 1;
  }

  const parts: QueryParts = { head: text.trim() };
  if (marks.length === 0) return parts;
  parts.head = text.slice(0, marks[0]!.start).trim();
  for (let m = 0; m < marks.length; m++) {
    const { keyword, start } = marks[m]!;
    const end = m + 1 < marks.length ? marks[m + 1]!.start : text.length;
    const content = text.slice(start + keyword.length, end).trim();
    if (keyword === "REPEAT") parts.repeat = content;
    else if (keyword === "WHERE") parts.where = content;
    else if (keyword === "SUCH THAT") parts.suchThat = content;
    else parts.objective = `${keyword} ${content}`;
  }
  return parts;
}

export function joinQuery(parts: QueryParts): string {
  const pieces = [parts.head];
  if (parts.repeat !== undefined) pieces.push(`REPEAT ${parts.repeat}`);
  if (parts.where) pieces.push(`WHERE ${parts.where}`);
  if (parts.suchThat) pieces.push(`SUCH THAT ${parts.suchThat}`);
  if (parts.objective) pieces.push(parts.objective);
  return pieces.join(" ");
}

/**
 * Splice an accepted suggestion into the query text.
 *
 * Constraints conjoin with the existing clause (parenthesized, so an OR at
 * the old top level keeps its meaning); an objective replaces any existing
 * objective clause.
 */
export function applySuggestion(text: string, suggestion: Suggestion): string {
  const parts = splitQuery(text);
  if (suggestion.kind === "base_predicate") {
    parts.where = parts.where ? `(${parts.where}) AND ${suggestion.fragment}` : suggestion.fragment;
  } else if (suggestion.kind === "global_atom") {
    parts.suchThat = parts.suchThat
      ? `(${parts.suchThat}) AND ${suggestion.fragment}`
      : suggestion.fragment;
  } else {
    parts.objective = suggestion.fragment;
  }
  return joinQuery(parts);
}

/**
 * Top-level conjuncts of a clause body: the chip fragments, verbatim.
 *
 * BETWEEN consumes its own AND (exactly one, separating the two bounds), so
 * "SUM(P.c) BETWEEN 2000 AND 2500" stays one fragment.
 */
export function splitTopLevelAnd(expr: string): string[] {
  const out: string[] = [];
  let depth = 0;
  let start = 0;
  let i = 0;
  let pendingBetween = false;
  while (i < expr.length) {
    const ch = expr[i]!;
    if (ch === "'") {
      i = skipString(expr, i);
      continue;
    }
    if (ch === "(") depth += 1;
    else if (ch === ")") depth -= 1;
    else if (isWordChar(ch) && (i === 0 || !isWordChar(expr[i - 1]!))) {
      let end = i;
      while (end < expr.length && isWordChar(expr[end]!)) end += 1;
      const word = expr.slice(i, end).toUpperCase();
      if (word === "BETWEEN") {
        pendingBetween = true;
      } else if (word === "AND") {
        if (pendingBetween) {
          pendingBetween = false; // the AND between the two BETWEEN bounds
        } else if (depth === 0) {
          out.push(expr.slice(start, i).trim());
          start = end;
        }
      }
      i = end;
      continue;
    }
    i += 1;
  }
  const tail = expr.slice(start).trim();
  if (tail) out.push(tail);
  return out;
}

/** Remove one top-level conjunct; undefined when nothing remains. */
export function removeConjunct(expr: string, index: number): string | undefined {
  const conjuncts = splitTopLevelAnd(expr);
  conjuncts.splice(index, 1);
  return conjuncts.length ? conjuncts.join(" AND ") : undefined;
}
