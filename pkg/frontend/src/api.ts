// Thin client for the evaluation session API. All numbers displayed by the
// dashboard come from these payloads; the client never computes scores.

import { canonicalStringify } from "./canon.js";
import type {
  AnalysisRequest,
  AnalysisStarted,
  ResultEnvelope,
  SessionSummary,
  ValidationReportJson,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
    public details?: unknown,
  ) {
    super(`${code}: ${message}`);
  }
}

interface ErrorBody {
  code?: string;
  message?: string;
  details?: unknown;
}

async function raiseFor(response: Response): Promise<never> {
  let body: ErrorBody = {};
  try {
    body = (await response.json()) as ErrorBody;
  } catch {
    // non-JSON error body; keep defaults
  }
  throw new ApiError(body.code ?? "HTTP_ERROR", body.message ?? response.statusText, response.status, body.details);
}

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ApiClient {
  constructor(
    private baseUrl = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async createSession(): Promise<string> {
    const response = await this.fetchFn(this.url("/api/sessions"), { method: "POST" });
    if (!response.ok) await raiseFor(response);
    return ((await response.json()) as { session_id: string }).session_id;
  }

  async uploadFile(
    sessionId: string,
    kind: "queries" | "qrels" | "run" | "embeddings",
    body: BodyInit,
    name?: string,
  ): Promise<ValidationReportJson> {
    const params = new URLSearchParams({ kind });
    if (name) params.set("name", name);
    const response = await this.fetchFn(this.url(`/api/sessions/${sessionId}/files?${params}`), {
      method: "POST",
      body,
    });
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as ValidationReportJson;
  }

  async summary(sessionId: string): Promise<SessionSummary> {
    const response = await this.fetchFn(this.url(`/api/sessions/${sessionId}`));
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as SessionSummary;
  }

  async startAnalysis(sessionId: string, request: AnalysisRequest): Promise<AnalysisStarted> {
    const response = await this.fetchFn(this.url(`/api/sessions/${sessionId}/analyses`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: canonicalStringify(request),
    });
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as AnalysisStarted;
  }

  /** One GET; returns null while the result is still pending. */
  async tryResult(sessionId: string, reference: string): Promise<ResultEnvelope | null> {
    const response = await this.fetchFn(this.url(`/api/sessions/${sessionId}/results/${reference}`));
    if (response.status === 202) return null;
    if (!response.ok) await raiseFor(response);
    return (await response.json()) as ResultEnvelope;
  }

  /** Start an analysis and poll until it reaches a terminal state. */
  async fetchResult(
    sessionId: string,
    request: AnalysisRequest,
    options: PollOptions = {},
  ): Promise<ResultEnvelope> {
    const { intervalMs = 150, timeoutMs = 30000, sleep = defaultSleep } = options;
    const started = await this.startAnalysis(sessionId, request);
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const result = await this.tryResult(sessionId, started.reference);
      if (result !== null) return result;
      if (Date.now() > deadline) {
        throw new ApiError("POLL_TIMEOUT", `analysis ${request.kind} still pending`, 0);
      }
      await sleep(intervalMs);
    }
  }

  /** Server-rendered CSV bytes for a finished result (verbatim pass-through). */
  async fetchCsv(sessionId: string, reference: string): Promise<Uint8Array> {
    const response = await this.fetchFn(this.url(`/api/sessions/${sessionId}/results/${reference}/csv`));
    if (!response.ok) await raiseFor(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  reportUrl(sessionId: string, sections?: string[]): string {
    const suffix = sections && sections.length ? `?sections=${sections.join(",")}` : "";
    return this.url(`/api/sessions/${sessionId}/report${suffix}`);
  }

  exportUrl(sessionId: string): string {
    return this.url(`/api/sessions/${sessionId}/export`);
  }
}
