/**
 * Application store: one state object, async actions, subscriber callbacks.
 *
 * Every package shown anywhere came from a server response; the store never
 * edits tuples locally. Session mutations (pin/replace) are serialized by
 * the `busySession` flag, and the template package always follows the last
 * server answer.
 */

import {
  ApiClient,
  ApiError,
  type DatasetInfo,
  type EvaluateResult,
  type PackageView,
  type ParseResult,
  type SessionView,
  type Suggestion,
  type SummaryResult,
} from "./api.js";
import { applySuggestion, removeConjunct, splitQuery, joinQuery } from "./queryText.js";

export interface Diagnostics {
  code: string;
  message: string;
  position?: { line: number; column: number };
}

export interface AppState {
  datasets: DatasetInfo[];
  dataset?: string;
  queryText: string;
  /** last server-accepted parse of queryText */
  parse?: ParseResult;
  diagnostics?: Diagnostics;
  evaluation?: EvaluateResult;
  evaluating: boolean;
  session?: SessionView;
  busySession: boolean;
  /** what the template table shows; always a server-returned package */
  shownPackage?: PackageView;
  shownSource: "none" | "evaluation" | "session" | "summary";
  suggestions?: { column: string; value?: string | number; items: Suggestion[] };
  summary?: SummaryResult;
  selectedPoint?: number;
  notice?: string;
  timedOut: boolean;
}

type Listener = (state: AppState) => void;

export class Store {
  state: AppState = {
    datasets: [],
    queryText: "",
    evaluating: false,
    busySession: false,
    shownSource: "none",
    timedOut: false,
  };

  private listeners: Listener[] = [];

  constructor(readonly api: ApiClient) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  private update(patch: Partial<AppState>): void {
    this.state = { ...this.state, ...patch };
    this.emit();
  }

  private fail(error: unknown): void {
    if (error instanceof ApiError) {
      if (error.status === 503) {
        this.update({ notice: "solver timed out", timedOut: true });
      } else {
        this.update({ notice: `${error.code}: ${error.body.message}`, timedOut: false });
      }
      return;
    }
    this.update({ notice: String(error), timedOut: false });
  }

  async loadDatasets(): Promise<void> {
    try {
      const datasets = await this.api.listDatasets();
      const dataset = this.state.dataset ?? datasets[0]?.name;
      this.update({ datasets, dataset });
    } catch (error) {
      this.fail(error);
    }
  }

  chooseDataset(name: string): void {
    this.update({
      dataset: name,
      evaluation: undefined,
      summary: undefined,
      session: undefined,
      shownPackage: undefined,
      shownSource: "none",
      suggestions: undefined,
    });
  }

  setQueryText(text: string): void {
    this.update({ queryText: text });
  }

  /** Parse on the server; keep diagnostics inline on failure. */
  async parseQuery(): Promise<ParseResult | undefined> {
    try {
      const parse = await this.api.parseQuery(this.state.queryText);
      this.update({ parse, diagnostics: undefined, notice: undefined });
      return parse;
    } catch (error) {
      if (error instanceof ApiError && error.status === 400) {
        this.update({
          diagnostics: {
            code: error.code,
            message: error.body.message,
            position: error.body.position,
          },
        });
        return undefined;
      }
      this.fail(error);
      return undefined;
    }
  }

  /** Parse, evaluate, and refresh the summary for the current query. */
  async run(): Promise<void> {
    const dataset = this.state.dataset;
    if (!dataset) return;
    const parse = await this.parseQuery();
    if (!parse) return;
    this.update({ evaluating: true, timedOut: false });
    try {
      const evaluation = await this.api.evaluate(dataset, parse.canonicalText, "ilp");
      this.update({
        evaluation,
        evaluating: false,
        shownPackage: evaluation.package ?? undefined,
        shownSource: evaluation.package ? "evaluation" : "none",
        session: undefined,
        notice:
          evaluation.status === "infeasible"
            ? "no package satisfies this query"
            : undefined,
      });
    } catch (error) {
      this.update({ evaluating: false });
      this.fail(error);
      return;
    }
    try {
      const summary = await this.api.summary(dataset, parse.canonicalText);
      this.update({ summary, selectedPoint: 0 });
    } catch {
      this.update({ summary: undefined, selectedPoint: undefined });
    }
  }

  async retry(): Promise<void> {
    await this.run();
  }

  /** Cell selection in column `column` asks the server for suggestions. */
  async selectCell(column: string, value?: string | number): Promise<void> {
    const dataset = this.state.dataset;
    if (!dataset) return;
    try {
      const items = await this.api.suggest(
        dataset,
        column,
        value,
        this.state.parse?.canonicalText ?? undefined,
      );
      this.update({ suggestions: { column, value, items } });
    } catch (error) {
      this.fail(error);
    }
  }

  /** Accept a suggestion: rewrite the text, re-parse, re-evaluate. */
  async acceptSuggestion(suggestion: Suggestion): Promise<void> {
    const base = this.state.parse?.canonicalText ?? this.state.queryText;
    const rewritten = applySuggestion(base, suggestion);
    this.update({ queryText: rewritten, suggestions: undefined });
    await this.run();
  }

  /** Remove one constraint chip and re-run. */
  async removeChip(kind: "where" | "suchThat" | "objective", index: number): Promise<void> {
    const canonical = this.state.parse?.canonicalText;
    if (!canonical) return;
    const parts = splitQuery(canonical);
    if (kind === "objective") {
      parts.objective = undefined;
    } else {
      const current = kind === "where" ? parts.where : parts.suchThat;
      if (current === undefined) return;
      const reduced = removeConjunct(current, index);
      if (kind === "where") parts.where = reduced;
      else parts.suchThat = reduced;
    }
    this.update({ queryText: joinQuery(parts) });
    await this.run();
  }

  async startSession(): Promise<void> {
    const dataset = this.state.dataset;
    const parse = this.state.parse ?? (await this.parseQuery());
    if (!dataset || !parse) return;
    this.update({ busySession: true });
    try {
      const created = await this.api.createSession(dataset, parse.canonicalText);
      const session = await this.api.getSession(created.sessionId);
      this.update({
        session,
        busySession: false,
        shownPackage: session.package,
        shownSource: "session",
        notice: undefined,
      });
    } catch (error) {
      this.update({ busySession: false });
      this.fail(error);
    }
  }

  async restoreSession(sessionId: string): Promise<void> {
    try {
      const session = await this.api.getSession(sessionId);
      this.update({
        session,
        dataset: session.dataset,
        queryText: session.queryText,
        shownPackage: session.package,
        shownSource: "session",
      });
      await this.parseQuery();
    } catch {
      // expired or unknown session ids are dropped silently
    }
  }

  async togglePin(tupleId: number): Promise<void> {
    const session = this.state.session;
    if (!session || this.state.busySession) return;
    const pinned = session.pinned[String(tupleId)] !== undefined;
    this.update({ busySession: true });
    try {
      const view = await this.api.pin(session.sessionId, tupleId, pinned ? 0 : 1);
      this.update({
        session: view,
        busySession: false,
        shownPackage: view.package,
        shownSource: "session",
      });
    } catch (error) {
      this.update({ busySession: false });
      this.fail(error);
    }
  }

  /** "Replace others": new sample preserving pins; NO_ALTERNATIVE is a notice. */
  async replaceOthers(): Promise<void> {
    const session = this.state.session;
    if (!session || this.state.busySession) return;
    this.update({ busySession: true });
    try {
      await this.api.replace(session.sessionId);
      const view = await this.api.getSession(session.sessionId);
      this.update({
        session: view,
        busySession: false,
        shownPackage: view.package,
        shownSource: "session",
        notice: undefined,
      });
    } catch (error) {
      this.update({ busySession: false });
      if (error instanceof ApiError && error.code === "NO_ALTERNATIVE") {
        this.update({ notice: "no other package fits the current pins" });
        return;
      }
      this.fail(error);
    }
  }

  /** Clicking a summary glyph loads that (server-produced) package. */
  selectSummaryPoint(index: number): void {
    const point = this.state.summary?.points[index];
    if (!point) return;
    this.update({
      selectedPoint: index,
      shownPackage: point.package,
      shownSource: "summary",
    });
  }
}
