/** Typed client for the package-query HTTP contract. */

export interface ColumnSchema {
  name: string;
  kind: "numeric" | "text";
}

export interface DatasetInfo {
  name: string;
  rows: number;
  schema: { columns: ColumnSchema[] };
}

export interface PackageTuple {
  id: number;
  multiplicity: number;
  values: Record<string, string | number>;
}

export interface PackageView {
  relation: string;
  tuples: PackageTuple[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  position?: { line: number; column: number };
  stats?: unknown;
}

export interface AggregateAst {
  func: "count" | "sum" | "avg" | "min" | "max";
  column: string | null;
}

export interface QueryAst {
  relation: string;
  relationAlias: string;
  packageAlias: string;
  repeat: number | null;
  basePredicate: unknown;
  globalFormula: unknown;
  objective: { direction: "maximize" | "minimize"; agg: AggregateAst } | null;
}

export interface ParseResult {
  ast: QueryAst;
  canonicalText: string;
}

export interface BoundsView {
  lower: number;
  upper: number | null;
  perAtom: { atom: string; lower: number; upper: number | null }[];
}

export interface EvaluateResult {
  status: "optimal" | "feasible" | "infeasible" | "aborted";
  package?: PackageView;
  objective?: number;
  bounds: BoundsView;
  stats: Record<string, unknown>;
}

export interface Suggestion {
  kind: "base_predicate" | "global_atom" | "objective";
  fragment: string;
  rationale: string;
}

export interface SummaryPointView {
  package: PackageView;
  x: number;
  y: number;
}

export interface SummaryResult {
  dims: { x: string; y: string };
  points: SummaryPointView[];
}

export interface SessionCreated {
  sessionId: string;
  package: PackageView;
}

export interface SessionView {
  sessionId: string;
  dataset: string;
  queryText: string;
  package: PackageView;
  pinned: Record<string, number>;
  nogoods: number;
  seed: number;
}

export type EvaluateMethod = "ilp" | "local" | "brute";

/** Error envelope the service returns for every non-2xx response. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
    this.name = "ApiError";
  }

  get code(): string {
    return this.body.code;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, payload as ApiErrorBody);
    }
    return payload as T;
  }

  listDatasets(): Promise<DatasetInfo[]> {
    return this.request("GET", "/datasets");
  }

  createDataset(name: string, csv: string): Promise<DatasetInfo> {
    return this.request("POST", "/datasets", { name, csv });
  }

  parseQuery(text: string): Promise<ParseResult> {
    return this.request("POST", "/queries/parse", { text });
  }

  evaluate(
    dataset: string,
    text: string,
    method: EvaluateMethod,
    options: { seed?: number; timeoutMs?: number } = {},
  ): Promise<EvaluateResult> {
    return this.request("POST", "/queries/evaluate", { dataset, text, method, ...options });
  }

  createSession(dataset: string, text: string, seed = 0): Promise<SessionCreated> {
    return this.request("POST", "/sessions", { dataset, text, seed });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  pin(sessionId: string, tupleId: number, multiplicity = 1): Promise<SessionView> {
    return this.request("POST", `/sessions/${sessionId}/pin`, { tupleId, multiplicity });
  }

  replace(sessionId: string): Promise<{ package: PackageView }> {
    return this.request("POST", `/sessions/${sessionId}/replace`, {});
  }

  suggest(
    dataset: string,
    column: string,
    value?: string | number,
    queryText?: string,
  ): Promise<Suggestion[]> {
    return this.request("POST", "/suggest", { dataset, column, value, queryText });
  }

  summary(dataset: string, text: string, maxPackages = 16, seed = 0): Promise<SummaryResult> {
    return this.request("POST", "/summary", { dataset, text, maxPackages, seed });
  }
}
