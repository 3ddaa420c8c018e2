// Payload shapes mirroring the server's canonical JSON results.

export type ValidationIssue = [number, string, string];

export interface ValidationReportJson {
  errors: ValidationIssue[];
  warnings: ValidationIssue[];
  stats: { lines_read: number; records_kept: number; records_dropped: number };
}

export interface EvaluatePayload {
  run_ids: string[];
  measures: string[];
  eval_qids: string[];
  excluded_qids: string[];
  measure_qids: Record<string, string[]>;
  scores: Record<string, Record<string, Record<string, number>>>;
  means: Record<string, Record<string, number>>;
  missing_query_policy: string;
  mean_ci?: Record<string, Record<string, [number, number]>>;
}

export interface SignificanceRow {
  baseline: string;
  comparison: string;
  measure: string;
  test: string;
  statistic: number;
  p: number;
  adjusted_p: number;
  significant: boolean;
  n_effective: number;
  effect_size: number | null;
  mean_baseline: number;
  mean_comparison: number;
}

export interface SignificancePayload {
  baseline: string;
  measure: string;
  test: string;
  correction: string;
  alpha: number;
  rows: SignificanceRow[];
}

export interface PrCurvePayload {
  run_id: string;
  recall_levels: number[];
  average: number[];
  per_query: Record<string, number[]>;
}

export interface DeltaPayload {
  baseline: string;
  comparison: string;
  measure: string;
  deltas: [string, number][];
  wins: number;
  ties: number;
  losses: number;
  tie_band: number;
}

export interface TokenFrequenciesPayload {
  entries: [string, number][];
}

export interface ProjectionPayload {
  qids: string[];
  dims: number;
  coordinates: number[][];
  explained_variance_ratio: number[];
  source: string;
}

export interface LengthBucketJson {
  min_length: number;
  max_length: number;
  count: number;
  mean_score: number;
}

export interface QueryLengthPayload {
  run_id: string;
  measure: string;
  points: [string, number, number][];
  buckets: LengthBucketJson[];
  pearson: [number, number] | null;
  spearman: [number, number] | null;
  warnings: string[];
}

export interface QrelsDistributionPayload {
  grade_histogram: Record<string, number>;
  per_query: Record<string, [number, number]>;
  total_judgments: number;
  total_queries: number;
  total_relevant: number;
}

export interface MultiQueryDocsPayload {
  documents: [string, string[]][];
}

export interface RankTracePayload {
  doc_id: string;
  ranks: Record<string, Record<string, number>>;
  judged_grades: Record<string, number>;
}

export interface AnalysisRequest {
  kind: string;
  parameters: Record<string, unknown>;
}

export interface AnalysisStarted {
  reference: string;
  state: string;
}

export interface ResultEnvelope {
  reference: string;
  kind: string;
  parameters: Record<string, unknown>;
  state: string;
  payload: unknown;
}

export interface SessionSummary {
  session_id: string;
  created_at: string;
  modified_at: string;
  uploads: Record<string, { kind: string; name: string; digest: string }>;
  results: Record<string, { kind: string; state: string }>;
}
