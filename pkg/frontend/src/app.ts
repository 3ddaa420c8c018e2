// Single-page dashboard over the evaluation API. Pages mirror the four
// analysis reports; each panel owns one analysis kind, re-queries (debounced)
// when one of its controls changes, and ignores stale responses.

import { ApiClient, ApiError } from "./api.js";
import { debounce, type Debounced, SequenceGate } from "./async.js";
import {
  deltaBarSVG,
  lineChartSVG,
  prCurveChartData,
  projectionScatterSVG,
  projection3DScatterSVG,
  wordCloudSVG,
} from "./charts.js";
import { downloadBytes, lineChartPNG } from "./export.js";
import { escapeHtml } from "./format.js";
import {
  buildAnalysisRequest,
  type DashboardState,
  initialState,
  type PageId,
  PAGE_PANELS,
  type PanelId,
  missingUploads,
} from "./state.js";
import {
  renderDeltaSummary,
  renderDeltaTable,
  renderDistributionTable,
  renderLengthTable,
  renderMultiDocTable,
  renderPerformanceTable,
  renderRankTraceTable,
  renderSignificanceTable,
  renderTokenTable,
} from "./tables.js";
import type {
  DeltaPayload,
  EvaluatePayload,
  MultiQueryDocsPayload,
  PrCurvePayload,
  ProjectionPayload,
  QrelsDistributionPayload,
  QueryLengthPayload,
  RankTracePayload,
  ResultEnvelope,
  SignificancePayload,
  TokenFrequenciesPayload,
} from "./types.js";

export interface PanelView {
  setStatus(text: string): void;
  setContent(html: string): void;
}

/**
 * One analysis panel: state in, exactly one (debounced) request out, one
 * rendered view. Stale responses are dropped via sequence tickets.
 */
export class PanelController {
  requestsIssued = 0;
  private gate = new SequenceGate();
  private scheduled: Debounced<[]>;

  constructor(
    private api: ApiClient,
    private stateOf: () => DashboardState,
    readonly panel: PanelId,
    private view: PanelView,
    private render: (envelope: ResultEnvelope) => string,
    debounceMs = 300,
  ) {
    this.scheduled = debounce(() => void this.refreshNow(), debounceMs);
  }

  /** Debounced refresh; call on every control change. */
  schedule(): void {
    this.scheduled();
  }

  async refreshNow(): Promise<void> {
    const state = this.stateOf();
    if (!state.sessionId) {
      this.view.setStatus("upload files to begin");
      return;
    }
    const missing = missingUploads(state, this.panel);
    if (missing.length > 0) {
      this.view.setStatus(`missing: ${missing.join(", ")} (no request sent)`);
      return;
    }
    const request = buildAnalysisRequest(state, this.panel);
    if (request === null) {
      this.view.setStatus("incomplete selection (no request sent)");
      return;
    }
    const ticket = this.gate.next();
    this.view.setStatus("loading…");
    this.requestsIssued += 1;
    try {
      const envelope = await this.api.fetchResult(state.sessionId, request);
      if (!this.gate.isCurrent(ticket)) return; // a newer request superseded this one
      this.view.setContent(this.render(envelope));
      this.view.setStatus("");
    } catch (error) {
      if (!this.gate.isCurrent(ticket)) return;
      const message = error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
      this.view.setStatus(`error — ${message}`);
    }
  }
}

// ---------------------------------------------------------------------------
// DOM dashboard

const PAGE_TITLES: Record<PageId, string> = {
  performance: "Experiment Performance Report",
  query: "Query-based Report",
  text: "Query Text-based Report",
  collection: "Query Collection-based Report",
};

export class Dashboard {
  state: DashboardState = initialState();
  panels = new Map<PanelId, PanelController>();
  lastPrPayload: PrCurvePayload | null = null;
  lastEvalReference: string | null = null;
  lastSignificanceReference: string | null = null;
  private lastProjection: ProjectionPayload | null = null;
  private rotation = 30;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    private debounceMs = 300,
  ) {
    this.buildSkeleton();
    this.buildPanels();
  }

  private element<T extends HTMLElement>(id: string): T {
    const node = this.root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing dashboard element #${id}`);
    return node as T;
  }

  private buildSkeleton(): void {
    const tabs = (Object.keys(PAGE_TITLES) as PageId[])
      .map((p) => `<button class="tab" data-page="${p}" id="tab-${p}">${escapeHtml(PAGE_TITLES[p])}</button>`)
      .join("");
    this.root.innerHTML = `
      <header>
        <h1>IR Evaluation Workbench</h1>
        <nav id="tabs"><button class="tab active" data-page="upload" id="tab-upload">Upload &amp; Configure</button>${tabs}</nav>
      </header>
      <main>
        <section class="page active" id="page-upload">
          <h2>Upload &amp; Configure</h2>
          <p id="session-line">No session yet.</p>
          <div class="uploader">
            <label>queries <input type="file" id="file-queries"></label>
            <label>qrels <input type="file" id="file-qrels"></label>
            <label>runs <input type="file" id="file-runs" multiple></label>
            <label>embeddings <input type="file" id="file-embeddings"></label>
          </div>
          <div id="upload-log"></div>
          <p><a id="report-link" href="#" hidden>download HTML report</a>
             <a id="export-link" href="#" hidden>download session JSON</a></p>
        </section>
        ${(Object.keys(PAGE_TITLES) as PageId[])
          .map((p) => `<section class="page" id="page-${p}"><h2>${escapeHtml(PAGE_TITLES[p])}</h2><div id="controls-${p}" class="controls"></div><div id="panels-${p}"></div></section>`)
          .join("")}
      </main>`;
    this.root.querySelectorAll<HTMLButtonElement>(".tab").forEach((tab) => {
      tab.addEventListener("click", () => this.showPage(tab.dataset.page as PageId | "upload"));
    });
    this.buildControls();
    this.bindUploads();
  }

  showPage(page: PageId | "upload"): void {
    this.root.querySelectorAll(".page").forEach((node) => node.classList.remove("active"));
    this.root.querySelectorAll(".tab").forEach((node) => node.classList.remove("active"));
    this.element(`page-${page}`).classList.add("active");
    this.element(`tab-${page}`).classList.add("active");
    if (page !== "upload") {
      for (const panel of PAGE_PANELS[page]) this.panels.get(panel)?.schedule();
    }
  }

  private buildControls(): void {
    this.element("controls-performance").innerHTML = `
      <fieldset><legend>measures</legend>
        ${["AP", "nDCG@10", "P@10", "RR", "Bpref"]
          .map(
            (m) =>
              `<label><input type="checkbox" class="measure-toggle" value="${m}" ${this.state.measures.includes(m) ? "checked" : ""}>${m}</label>`,
          )
          .join(" ")}
      </fieldset>
      <label>baseline <select id="ctl-baseline"></select></label>
      <label>sig. measure <input id="ctl-sig-measure" value="AP" size="8"></label>
      <label>test <select id="ctl-test"><option value="t_test">paired t</option><option value="wilcoxon">Wilcoxon</option></select></label>
      <label>correction <select id="ctl-correction"><option>holm</option><option>bonferroni</option></select></label>
      <label>alpha <input id="ctl-alpha" type="number" value="0.05" step="0.01" min="0.001" max="0.5"></label>
      <label>PR run <select id="ctl-pr-run"></select></label>
      <button id="btn-export-pr-png">export PR chart PNG</button>
      <button id="btn-export-eval-csv">export table CSV</button>
      <button id="btn-export-sig-csv">export significance CSV</button>`;
    this.element("controls-query").innerHTML = `
      <label>baseline <select id="ctl-delta-baseline"></select></label>
      <label>comparison <select id="ctl-delta-comparison"></select></label>
      <label>tie band <input id="ctl-tie-band" type="number" value="1e-9" step="any"></label>`;
    this.element("controls-text").innerHTML = `
      <label>dims <select id="ctl-dims"><option>2</option><option>3</option></select></label>
      <label>vectors <select id="ctl-source"><option value="tfidf">TF-IDF</option><option value="external">external embeddings</option></select></label>
      <label>rotation <input id="ctl-rotation" type="range" min="0" max="360" value="30"></label>
      <label>length buckets <input id="ctl-buckets" type="number" value="2" min="2" max="10"></label>`;
    this.element("controls-collection").innerHTML = `
      <label>min queries <input id="ctl-min-queries" type="number" value="2" min="2"></label>
      <label>trace doc <input id="ctl-trace-doc" placeholder="doc id"></label>`;

    const bind = (id: string, event: string, apply: (value: string) => void, panels: PanelId[]) => {
      const node = this.element<HTMLInputElement | HTMLSelectElement>(id);
      node.addEventListener(event, () => {
        apply(node.value);
        for (const panel of panels) this.panels.get(panel)?.schedule();
      });
    };
    this.root.querySelectorAll<HTMLInputElement>(".measure-toggle").forEach((box) => {
      box.addEventListener("change", () => {
        this.state.measures = box.checked
          ? [...this.state.measures, box.value]
          : this.state.measures.filter((m) => m !== box.value);
        this.panels.get("evaluate")?.schedule();
      });
    });
    bind("ctl-baseline", "change", (v) => (this.state.baseline = v || null), ["significance"]);
    bind("ctl-sig-measure", "change", (v) => (this.state.sigMeasure = v || "AP"), ["significance"]);
    bind("ctl-test", "change", (v) => (this.state.test = v as DashboardState["test"]), ["significance"]);
    bind("ctl-correction", "change", (v) => (this.state.correction = v as DashboardState["correction"]), [
      "significance",
    ]);
    bind("ctl-alpha", "change", (v) => (this.state.alpha = Number(v)), ["significance"]);
    bind("ctl-pr-run", "change", (v) => (this.state.prRun = v || null), ["pr_curve"]);
    bind("ctl-delta-baseline", "change", (v) => (this.state.baseline = v || null), ["query_delta"]);
    bind("ctl-delta-comparison", "change", (v) => (this.state.deltaComparison = v || null), ["query_delta"]);
    bind("ctl-tie-band", "change", (v) => (this.state.tieBand = Number(v)), ["query_delta"]);
    bind("ctl-dims", "change", (v) => (this.state.dims = Number(v) === 3 ? 3 : 2), ["projection"]);
    bind("ctl-source", "change", (v) => (this.state.vectorSource = v as DashboardState["vectorSource"]), [
      "projection",
    ]);
    bind("ctl-buckets", "change", (v) => (this.state.nBuckets = Number(v)), ["query_length"]);
    bind("ctl-min-queries", "change", (v) => (this.state.minQueries = Number(v)), ["multi_query_documents"]);
    bind("ctl-trace-doc", "change", (v) => (this.state.traceDocId = v || null), ["document_rank_trace"]);

    // rotation is a local view setting: re-render, no request
    this.element<HTMLInputElement>("ctl-rotation").addEventListener("input", () => {
      this.rotation = Number(this.element<HTMLInputElement>("ctl-rotation").value);
      if (this.lastProjection && this.lastProjection.dims === 3) {
        this.element("content-projection").innerHTML = this.renderProjection(this.lastProjection);
      }
    });
    this.element("btn-export-pr-png").addEventListener("click", () => this.exportPrPng());
    this.element("btn-export-eval-csv").addEventListener("click", () => void this.exportCsv(this.lastEvalReference, "evaluation.csv"));
    this.element("btn-export-sig-csv").addEventListener("click", () => void this.exportCsv(this.lastSignificanceReference, "significance.csv"));
  }

  private panelHost(page: PageId, panel: PanelId, title: string): PanelView {
    const host = document.createElement("div");
    host.className = "panel";
    host.innerHTML = `<h3>${escapeHtml(title)}</h3><p class="status" id="status-${panel}"></p><div class="content" id="content-${panel}"></div>`;
    this.element(`panels-${page}`).appendChild(host);
    return {
      setStatus: (text) => (this.element(`status-${panel}`).textContent = text),
      setContent: (html) => (this.element(`content-${panel}`).innerHTML = html),
    };
  }

  private buildPanels(): void {
    const add = (page: PageId, panel: PanelId, title: string, render: (e: ResultEnvelope) => string) => {
      const controller = new PanelController(
        this.api,
        () => this.state,
        panel,
        this.panelHost(page, panel, title),
        render,
        this.debounceMs,
      );
      this.panels.set(panel, controller);
    };
    add("performance", "evaluate", "Mean scores", (e) => {
      this.lastEvalReference = e.reference;
      return renderPerformanceTable(e.payload as EvaluatePayload, null);
    });
    add("performance", "significance", "Statistical significance", (e) => {
      this.lastSignificanceReference = e.reference;
      return renderSignificanceTable(e.payload as SignificancePayload);
    });
    add("performance", "pr_curve", "Precision-recall", (e) => {
      const payload = e.payload as PrCurvePayload;
      this.lastPrPayload = payload;
      return lineChartSVG(prCurveChartData([payload]));
    });
    add("query", "query_delta", "Per-query deltas", (e) => {
      const payload = e.payload as DeltaPayload;
      return renderDeltaSummary(payload) + deltaBarSVG(payload) + renderDeltaTable(payload);
    });
    add("text", "token_frequencies", "Word cloud", (e) =>
      wordCloudSVG(e.payload as TokenFrequenciesPayload) + renderTokenTable(e.payload as TokenFrequenciesPayload),
    );
    add("text", "projection", "Query similarity", (e) => {
      const payload = e.payload as ProjectionPayload;
      this.lastProjection = payload;
      return this.renderProjection(payload);
    });
    add("text", "query_length", "Length vs effectiveness", (e) =>
      renderLengthTable(e.payload as QueryLengthPayload),
    );
    add("collection", "qrels_distribution", "Judgment distribution", (e) =>
      renderDistributionTable(e.payload as QrelsDistributionPayload),
    );
    add("collection", "multi_query_documents", "Documents shared across queries", (e) =>
      renderMultiDocTable(e.payload as MultiQueryDocsPayload),
    );
    add("collection", "document_rank_trace", "Document rank trace", (e) =>
      renderRankTraceTable(e.payload as RankTracePayload),
    );
  }

  private renderProjection(payload: ProjectionPayload): string {
    return payload.dims === 3
      ? projection3DScatterSVG(payload, this.rotation)
      : projectionScatterSVG(payload);
  }

  private bindUploads(): void {
    const kinds: ["queries" | "qrels" | "run" | "embeddings", string][] = [
      ["queries", "file-queries"],
      ["qrels", "file-qrels"],
      ["run", "file-runs"],
      ["embeddings", "file-embeddings"],
    ];
    for (const [kind, id] of kinds) {
      this.element<HTMLInputElement>(id).addEventListener("change", (event) => {
        const input = event.target as HTMLInputElement;
        void this.uploadFiles(kind, Array.from(input.files ?? []));
      });
    }
  }

  async ensureSession(): Promise<string> {
    if (!this.state.sessionId) {
      this.state.sessionId = await this.api.createSession();
      this.element("session-line").textContent = `Session ${this.state.sessionId}`;
      const report = this.element<HTMLAnchorElement>("report-link");
      report.href = this.api.reportUrl(this.state.sessionId);
      report.hidden = false;
      const exportLink = this.element<HTMLAnchorElement>("export-link");
      exportLink.href = this.api.exportUrl(this.state.sessionId);
      exportLink.hidden = false;
    }
    return this.state.sessionId;
  }

  async uploadFiles(kind: "queries" | "qrels" | "run" | "embeddings", files: File[]): Promise<void> {
    const log = this.element("upload-log");
    for (const file of files) {
      try {
        const sessionId = await this.ensureSession();
        const report = await this.api.uploadFile(sessionId, kind, file, file.name);
        if (kind === "queries") this.state.hasQueries = true;
        if (kind === "qrels") this.state.hasQrels = true;
        if (kind === "run") await this.refreshRunList();
        const warnings = report.warnings.length ? ` (${report.warnings.length} warnings)` : "";
        log.innerHTML += `<p>uploaded ${escapeHtml(file.name)} as ${kind}${warnings}</p>`;
      } catch (error) {
        const message = error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
        log.innerHTML += `<p class="error">upload ${escapeHtml(file.name)} failed — ${escapeHtml(message)}</p>`;
      }
    }
  }

  async refreshRunList(): Promise<void> {
    if (!this.state.sessionId) return;
    const summary = await this.api.summary(this.state.sessionId);
    this.state.runs = Object.values(summary.uploads)
      .filter((u) => u.kind === "run")
      .map((u) => u.name)
      .sort();
    for (const id of ["ctl-baseline", "ctl-pr-run", "ctl-delta-baseline", "ctl-delta-comparison"]) {
      const select = this.element<HTMLSelectElement>(id);
      const previous = select.value;
      select.innerHTML = this.state.runs.map((r) => `<option>${escapeHtml(r)}</option>`).join("");
      if (previous && this.state.runs.includes(previous)) select.value = previous;
    }
    if (this.state.runs.length > 1) {
      this.element<HTMLSelectElement>("ctl-delta-comparison").value = this.state.runs[1];
      this.state.deltaComparison = this.state.runs[1];
    }
  }

  exportPrPng(): void {
    if (!this.lastPrPayload) return;
    downloadBytes(lineChartPNG(prCurveChartData([this.lastPrPayload])), `pr-${this.lastPrPayload.run_id}.png`, "image/png");
  }

  async exportCsv(reference: string | null, filename: string): Promise<void> {
    if (!reference || !this.state.sessionId) return;
    const bytes = await this.api.fetchCsv(this.state.sessionId, reference);
    downloadBytes(bytes, filename, "text/csv");
  }
}

export function mountDashboard(root: HTMLElement, api = new ApiClient(""), debounceMs = 300): Dashboard {
  return new Dashboard(root, api, debounceMs);
}
