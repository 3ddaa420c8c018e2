// Dashboard state and the pure state -> analysis-request mapping. Every
// request body is a function of this state only, so equal states produce
// equal bodies and hit the server's result cache.

import type { AnalysisRequest } from "./types.js";

export type PageId = "performance" | "query" | "text" | "collection";

export interface DashboardState {
  sessionId: string | null;
  hasQueries: boolean;
  hasQrels: boolean;
  runs: string[];
  measures: string[];
  relThreshold: number;
  gain: "linear" | "exponential";
  policy: "zero_fill" | "intersect";
  baseline: string | null;
  sigMeasure: string;
  test: "t_test" | "wilcoxon";
  correction: "holm" | "bonferroni";
  alpha: number;
  prRun: string | null;
  deltaComparison: string | null;
  tieBand: number;
  dims: 2 | 3;
  vectorSource: "tfidf" | "external";
  lengthRun: string | null;
  nBuckets: number;
  minQueries: number;
  traceDocId: string | null;
}

export function initialState(): DashboardState {
  return {
    sessionId: null,
    hasQueries: false,
    hasQrels: false,
    runs: [],
    measures: ["AP", "nDCG@10"],
    relThreshold: 1,
    gain: "linear",
    policy: "zero_fill",
    baseline: null,
    sigMeasure: "AP",
    test: "t_test",
    correction: "holm",
    alpha: 0.05,
    prRun: null,
    deltaComparison: null,
    tieBand: 1e-9,
    dims: 2,
    vectorSource: "tfidf",
    lengthRun: null,
    nBuckets: 2,
    minQueries: 2,
    traceDocId: null,
  };
}

// Each panel is one analysis kind; a control change re-issues exactly the
// request of the panel it belongs to.
export type PanelId =
  | "evaluate"
  | "significance"
  | "pr_curve"
  | "query_delta"
  | "token_frequencies"
  | "projection"
  | "query_length"
  | "qrels_distribution"
  | "multi_query_documents"
  | "document_rank_trace";

export const PAGE_PANELS: Record<PageId, PanelId[]> = {
  performance: ["evaluate", "significance", "pr_curve"],
  query: ["query_delta"],
  text: ["token_frequencies", "projection", "query_length"],
  collection: ["qrels_distribution", "multi_query_documents", "document_rank_trace"],
};

/** Upload kinds a panel needs before its request can be sent. */
export function missingUploads(state: DashboardState, panel: PanelId): string[] {
  const missing: string[] = [];
  const needQrels: PanelId[] = [
    "evaluate",
    "significance",
    "pr_curve",
    "query_delta",
    "query_length",
    "qrels_distribution",
    "multi_query_documents",
  ];
  const needRuns: PanelId[] = [
    "evaluate",
    "significance",
    "pr_curve",
    "query_delta",
    "query_length",
    "document_rank_trace",
  ];
  const needQueries: PanelId[] = ["token_frequencies", "projection", "query_length"];
  if (needQrels.includes(panel) && !state.hasQrels) missing.push("qrels");
  if (needRuns.includes(panel) && state.runs.length === 0) missing.push("run");
  if (needQueries.includes(panel) && !state.hasQueries) missing.push("queries");
  if (panel === "significance" && state.runs.length < 2) missing.push("second run");
  if (panel === "query_delta" && state.runs.length < 2) missing.push("second run");
  if (panel === "document_rank_trace" && !state.traceDocId) missing.push("document id");
  return missing;
}

/**
 * The canonical request body for one panel, or null when required uploads
 * or selections are absent (the caller shows a local message instead of
 * sending anything).
 */
export function buildAnalysisRequest(state: DashboardState, panel: PanelId): AnalysisRequest | null {
  if (missingUploads(state, panel).length > 0) return null;
  const evalParams = {
    rel_threshold: state.relThreshold,
    gain: state.gain,
    missing_query_policy: state.policy,
  };
  switch (panel) {
    case "evaluate":
      if (state.measures.length === 0) return null;
      return {
        kind: "evaluate",
        parameters: { measures: [...state.measures].sort(), ...evalParams },
      };
    case "significance": {
      const baseline = state.baseline ?? state.runs[0];
      return {
        kind: "significance",
        parameters: {
          baseline,
          measure: state.sigMeasure,
          test: state.test,
          correction: state.correction,
          alpha: state.alpha,
          ...evalParams,
        },
      };
    }
    case "pr_curve": {
      const run = state.prRun ?? state.runs[0];
      return { kind: "pr_curve", parameters: { run, rel_threshold: state.relThreshold } };
    }
    case "query_delta": {
      const baseline = state.baseline ?? state.runs[0];
      const comparison = state.deltaComparison ?? state.runs.find((r) => r !== baseline);
      if (!comparison) return null;
      return {
        kind: "query_delta",
        parameters: {
          baseline,
          comparison,
          measure: state.sigMeasure,
          tie_band: state.tieBand,
          ...evalParams,
        },
      };
    }
    case "token_frequencies":
      return { kind: "token_frequencies", parameters: {} };
    case "projection":
      return { kind: "projection", parameters: { dims: state.dims, source: state.vectorSource } };
    case "query_length": {
      const run = state.lengthRun ?? state.runs[0];
      return {
        kind: "query_length",
        parameters: { run, measure: state.sigMeasure, n_buckets: state.nBuckets, ...evalParams },
      };
    }
    case "qrels_distribution":
      return { kind: "qrels_distribution", parameters: { rel_threshold: state.relThreshold } };
    case "multi_query_documents":
      return {
        kind: "multi_query_documents",
        parameters: { min_queries: state.minQueries, rel_threshold: state.relThreshold },
      };
    case "document_rank_trace":
      return { kind: "document_rank_trace", parameters: { doc_id: state.traceDocId } };
  }
}
