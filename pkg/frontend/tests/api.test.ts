import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Recorded {
  url: string;
  method: string;
  body?: unknown;
}

function stubFetch(status: number, payload: unknown, calls: Recorded[]) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    });
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => payload,
    } as Response;
  };
}

describe("ApiClient", () => {
  it("posts evaluate with the documented body shape", async () => {
    const calls: Recorded[] = [];
    const client = new ApiClient(
      "http://api",
      stubFetch(200, { status: "optimal", bounds: { lower: 3, upper: 3, perAtom: [] }, stats: {} }, calls),
    );
    const result = await client.evaluate("recipes", "SELECT ...", "ilp", { seed: 7 });
    expect(result.status).toBe("optimal");
    expect(calls[0]).toEqual({
      url: "http://api/queries/evaluate",
      method: "POST",
      body: { dataset: "recipes", text: "SELECT ...", method: "ilp", seed: 7 },
    });
  });

  it("hits session routes with path parameters", async () => {
    const calls: Recorded[] = [];
    const client = new ApiClient("http://api", stubFetch(200, { package: { relation: "r", tuples: [] } }, calls));
    await client.pin("abc123", 4, 0);
    await client.replace("abc123");
    expect(calls[0]!.url).toBe("http://api/sessions/abc123/pin");
    expect(calls[0]!.body).toEqual({ tupleId: 4, multiplicity: 0 });
    expect(calls[1]!.url).toBe("http://api/sessions/abc123/replace");
  });

  it("wraps error envelopes in ApiError", async () => {
    const client = new ApiClient(
      "http://api",
      stubFetch(409, { code: "NO_ALTERNATIVE", message: "nothing else fits" }, []),
    );
    const failure = await client.replace("abc").catch((e: unknown) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(409);
    expect((failure as ApiError).code).toBe("NO_ALTERNATIVE");
    expect((failure as ApiError).message).toContain("nothing else fits");
  });

  it("carries parse positions through", async () => {
    const client = new ApiClient(
      "http://api",
      stubFetch(400, { code: "SYNTAX_ERROR", message: "expected FROM", position: { line: 2, column: 7 } }, []),
    );
    const failure = (await client.parseQuery("bad").catch((e: unknown) => e)) as ApiError;
    expect(failure.body.position).toEqual({ line: 2, column: 7 });
  });
});
