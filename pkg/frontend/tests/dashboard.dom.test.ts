// @vitest-environment happy-dom
import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { Dashboard } from "../src/app.js";
import type { EvaluatePayload, ResultEnvelope } from "../src/types.js";

const EVAL_PAYLOAD: EvaluatePayload = {
  run_ids: ["bm25", "dpr"],
  measures: ["AP"],
  eval_qids: ["q1", "q2", "q3"],
  excluded_qids: [],
  measure_qids: { AP: ["q1", "q2", "q3"] },
  scores: {
    bm25: { AP: { q1: 0.8333333333333334, q2: 0.5833333333333334, q3: 0.8333333333333334 } },
    dpr: { AP: { q1: 1.0, q2: 0.8333333333333334, q3: 0.8333333333333334 } },
  },
  means: { bm25: { AP: 0.7499999999999999 }, dpr: { AP: 0.8888888888888888 } },
  missing_query_policy: "zero_fill",
};

function fakeApi(): { api: ApiClient; analysisPosts: () => number } {
  let posts = 0;
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    if (url.endsWith("/analyses") && init?.method === "POST") {
      posts += 1;
      return new Response(JSON.stringify({ reference: `ref${posts}`, state: "done" }), { status: 200 });
    }
    if (url.includes("/results/")) {
      const envelope: ResultEnvelope = {
        reference: url.split("/").pop() as string,
        kind: "evaluate",
        parameters: {},
        state: "done",
        payload: EVAL_PAYLOAD,
      };
      return new Response(JSON.stringify(envelope), { status: 200 });
    }
    throw new Error(`unexpected ${init?.method ?? "GET"} ${url}`);
  };
  return { api: new ApiClient("", fetchFn), analysisPosts: () => posts };
}

describe("Dashboard", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("toggling a measure issues exactly one request and updates the table in place", async () => {
    const { api, analysisPosts } = fakeApi();
    const root = document.createElement("div");
    document.body.appendChild(root);
    const dashboard = new Dashboard(root, api, 300);
    dashboard.state.sessionId = "s1";
    dashboard.state.hasQueries = true;
    dashboard.state.hasQrels = true;
    dashboard.state.runs = ["bm25", "dpr"];
    const pageBefore = document.querySelector("main");

    const toggle = root.querySelector<HTMLInputElement>('.measure-toggle[value="P@10"]')!;
    toggle.checked = true;
    toggle.dispatchEvent(new Event("change", { bubbles: true }));
    await vi.advanceTimersByTimeAsync(300);
    await vi.runAllTimersAsync();

    expect(analysisPosts()).toBe(1);
    const table = root.querySelector("#performance-table");
    expect(table).not.toBeNull();
    // same document, same <main>: the update happened without a page reload
    expect(document.querySelector("main")).toBe(pageBefore);
    const cell = table!.querySelector('td.num[data-value="0.7499999999999999"]');
    expect(cell).not.toBeNull();
    expect(cell!.textContent).toBe("0.750000");
  });

  it("rapid toggles within the debounce window still issue exactly one request", async () => {
    const { api, analysisPosts } = fakeApi();
    const root = document.createElement("div");
    document.body.appendChild(root);
    const dashboard = new Dashboard(root, api, 300);
    dashboard.state.sessionId = "s1";
    dashboard.state.hasQrels = true;
    dashboard.state.runs = ["bm25", "dpr"];

    for (const value of ["P@10", "Bpref", "RR"]) {
      const box = root.querySelector<HTMLInputElement>(`.measure-toggle[value="${value}"]`)!;
      box.checked = true;
      box.dispatchEvent(new Event("change", { bubbles: true }));
      await vi.advanceTimersByTimeAsync(100); // inside the 300 ms window
    }
    await vi.advanceTimersByTimeAsync(300);
    await vi.runAllTimersAsync();
    expect(analysisPosts()).toBe(1);
  });

  it("shows a local message instead of requesting when uploads are missing", async () => {
    const { api, analysisPosts } = fakeApi();
    const root = document.createElement("div");
    document.body.appendChild(root);
    const dashboard = new Dashboard(root, api, 0);
    dashboard.state.sessionId = "s1"; // session but no qrels/runs
    await dashboard.panels.get("evaluate")!.refreshNow();
    expect(analysisPosts()).toBe(0);
    expect(root.querySelector("#status-evaluate")!.textContent).toContain("missing");
  });

  it("switching pages shows the target section without navigation", () => {
    const { api } = fakeApi();
    const root = document.createElement("div");
    document.body.appendChild(root);
    const dashboard = new Dashboard(root, api, 300);
    dashboard.showPage("collection");
    expect(root.querySelector("#page-collection")!.classList.contains("active")).toBe(true);
    expect(root.querySelector("#page-upload")!.classList.contains("active")).toBe(false);
  });
});
