import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, labelsFor, SPACE_LABELS } from "../src/api";

interface Captured {
  url: string;
  method: string;
  body?: unknown;
}

function fakeFetch(
  respond: (url: string, init?: RequestInit) => { status: number; json: unknown },
  log: Captured[],
) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    const entry: Captured = { url, method: init?.method ?? "GET" };
    if (typeof init?.body === "string") entry.body = JSON.parse(init.body);
    log.push(entry);
    const { status, json } = respond(url, init);
    return new Response(JSON.stringify(json), {
      status,
      headers: { "content-type": "application/json" },
    });
  };
}

describe("label sets", () => {
  it("offers exactly one selectable label set per classification system", () => {
    expect(labelsFor("FIVE")).toEqual(["S1", "S2", "S3", "S4", "S5"]);
    expect(labelsFor("FOUR")).toEqual(["I", "II", "III", "IV"]);
    expect(labelsFor("THREE")).toEqual(["A", "B", "C"]);
    expect(Object.keys(SPACE_LABELS)).toHaveLength(3);
    expect(() => labelsFor("SEVEN")).toThrow(/unknown label space/);
  });
});

describe("ApiClient", () => {
  it("builds routes, methods, and bodies the server expects", async () => {
    const log: Captured[] = [];
    const api = new ApiClient(
      "http://x/",
      fakeFetch(() => ({ status: 200, json: { ok: true } }), log),
    );

    await api.health();
    await api.listStudies();
    await api.getStudy("st 1");
    await api.nextItem("s", "r/2", "T0");
    await api.submitRating("s", "r", "T1", "c7", "B", 1.25);
    await api.report("s", 500);
    await api.report("s");

    expect(log.map((c) => `${c.method} ${c.url}`)).toEqual([
      "GET http://x/health",
      "GET http://x/studies",
      "GET http://x/studies/st%201",
      "GET http://x/studies/s/raters/r%2F2/phases/T0/next",
      "POST http://x/studies/s/raters/r/phases/T1/ratings",
      "GET http://x/studies/s/report?b=500",
      "GET http://x/studies/s/report",
    ]);
    expect(log[4]?.body).toEqual({ case: "c7", label: "B", elapsed_s: 1.25 });
  });

  it("omits elapsed_s when not measured", async () => {
    const log: Captured[] = [];
    const api = new ApiClient(
      "",
      fakeFetch(() => ({ status: 201, json: {} }), log),
    );
    await api.submitRating("s", "r", "T0", "c", "A");
    expect(log[0]?.body).toEqual({ case: "c", label: "A" });
  });

  it("turns error responses into ApiError with the server detail", async () => {
    const api = new ApiClient(
      "",
      fakeFetch(
        () => ({ status: 409, json: { detail: "conflicting rating for case c3" } }),
        [],
      ),
    );
    const failure = await api.nextItem("s", "r", "T1").catch((e: unknown) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(409);
    expect((failure as ApiError).detail).toContain("conflicting rating");
  });

  it("stringifies structured validation details", async () => {
    const api = new ApiClient(
      "",
      fakeFetch(() => ({ status: 422, json: { detail: [{ loc: ["query", "b"] }] } }), []),
    );
    const failure = await api.report("s", 1).catch((e: unknown) => e);
    expect((failure as ApiError).detail).toContain("query");
  });
});
