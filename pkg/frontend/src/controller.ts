/**
 * Screening session state machine, independent of the DOM.
 *
 * Phases: setup (name + dataset upload) -> priors (search picks + random
 * suggestions) -> screening (one record at a time) -> finished (export).
 * Exactly one record is on screen at a time and at most one label request
 * is in flight; rapid repeat decisions are dropped here, and a 409 from
 * the server (double submit after a race) is absorbed silently.
 */

import {
  ApiClient,
  ApiError,
  NextRecord,
  ProgressInfo,
  SearchHit,
  UploadSummary,
} from "./api.js";

export type Phase = "setup" | "priors" | "screening" | "finished";

export interface Decision {
  rowId: number;
  label: 0 | 1;
}

export interface SessionState {
  phase: Phase;
  projectId: string | null;
  projectName: string;
  upload: UploadSummary | null;
  error: string | null;
  notice: string | null;
  searchQuery: string;
  searchHits: SearchHit[];
  suggestions: SearchHit[];
  priorIncluded: Map<number, SearchHit>;
  priorExcluded: Map<number, SearchHit>;
  current: NextRecord | null;
  decisionPending: boolean;
  progress: ProgressInfo | null;
  lastDecision: Decision | null;
}

export interface SessionStorage {
  get(key: string): string | null;
  set(key: string, value: string): void;
  remove(key: string): void;
}

const PROJECT_KEY = "screenloop.project_id";

type Listener = (state: SessionState) => void;

export class ScreeningController {
  private state: SessionState = initialState();
  private listeners: Listener[] = [];

  constructor(
    private readonly api: ApiClient,
    private readonly storage?: SessionStorage,
  ) {}

  getState(): SessionState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private fail(err: unknown): void {
    const message =
      err instanceof ApiError
        ? err.message
        : err instanceof Error
          ? `network error: ${err.message}`
          : String(err);
    this.update({ error: message, decisionPending: false });
  }

  // --- setup ----------------------------------------------------------------

  async startProject(name: string): Promise<boolean> {
    const trimmed = name.trim();
    if (!trimmed) {
      this.update({ error: "project name must be non-empty" });
      return false;
    }
    try {
      const projectId = await this.api.createProject(trimmed);
      this.storage?.set(PROJECT_KEY, projectId);
      this.update({
        projectId,
        projectName: trimmed,
        error: null,
        notice: null,
      });
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    }
  }

  /** Upload stays on the setup step when the server rejects the file. */
  async uploadDataset(data: BodyInit, format?: "csv" | "ris"): Promise<boolean> {
    if (!this.state.projectId) {
      this.update({ error: "create a project first" });
      return false;
    }
    try {
      const upload = await this.api.uploadDataset(this.state.projectId, data, format);
      const notice =
        upload.n_rejected > 0
          ? `${upload.n_rejected} record(s) without title or abstract were dropped`
          : null;
      this.update({ upload, phase: "priors", error: null, notice });
      void this.refreshSuggestions();
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    }
  }

  // --- priors ------------------------------------------------------------------

  async searchPriors(query: string): Promise<void> {
    if (!this.state.projectId || !query.trim()) {
      return;
    }
    try {
      const hits = await this.api.search(this.state.projectId, query, 10);
      this.update({ searchQuery: query, searchHits: hits, error: null });
    } catch (err) {
      this.fail(err);
    }
  }

  async refreshSuggestions(k = 5): Promise<void> {
    if (!this.state.projectId) {
      return;
    }
    try {
      const suggestions = await this.api.suggest(this.state.projectId, k);
      this.update({ suggestions });
    } catch (err) {
      this.fail(err);
    }
  }

  pickPrior(hit: SearchHit, asRelevant: boolean): void {
    const included = new Map(this.state.priorIncluded);
    const excluded = new Map(this.state.priorExcluded);
    included.delete(hit.row_id);
    excluded.delete(hit.row_id);
    (asRelevant ? included : excluded).set(hit.row_id, hit);
    this.update({ priorIncluded: included, priorExcluded: excluded });
  }

  unpickPrior(rowId: number): void {
    const included = new Map(this.state.priorIncluded);
    const excluded = new Map(this.state.priorExcluded);
    included.delete(rowId);
    excluded.delete(rowId);
    this.update({ priorIncluded: included, priorExcluded: excluded });
  }

  /** Submit is only possible once both classes have at least one pick. */
  canSubmitPriors(): boolean {
    return this.state.priorIncluded.size > 0 && this.state.priorExcluded.size > 0;
  }

  async submitPriors(): Promise<boolean> {
    if (!this.state.projectId || !this.canSubmitPriors()) {
      return false;
    }
    try {
      const progress = await this.api.setPriors(
        this.state.projectId,
        [...this.state.priorIncluded.keys()],
        [...this.state.priorExcluded.keys()],
      );
      this.update({ progress, phase: "screening", error: null });
      await this.fetchNext();
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    }
  }

  // --- screening -------------------------------------------------------------------

  async fetchNext(): Promise<void> {
    if (!this.state.projectId) {
      return;
    }
    try {
      const record = await this.api.next(this.state.projectId);
      if (record === null) {
        this.update({ current: null, phase: "finished", decisionPending: false });
      } else {
        this.update({ current: record, decisionPending: false, error: null });
      }
    } catch (err) {
      this.fail(err);
    }
  }

  /**
   * Post one decision for the record on screen.  Returns false when the
   * call was dropped (nothing on screen, or a label is already in flight).
   */
  async decide(label: 0 | 1): Promise<boolean> {
    const record = this.state.current;
    if (!record || this.state.decisionPending || !this.state.projectId) {
      return false;
    }
    this.update({ decisionPending: true, error: null });
    try {
      const progress = await this.api.label(this.state.projectId, record.row_id, label);
      this.update({
        progress,
        lastDecision: { rowId: record.row_id, label },
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // double submit after a race: the label is already in; move on
      } else {
        this.fail(err);
        return false; // keep the record on screen; buttons re-enable
      }
    }
    await this.fetchNext();
    void this.refreshProgress();
    return true;
  }

  /** The event log is append-only; undo is surfaced as unsupported. */
  undoLast(): void {
    this.update({
      notice:
        this.state.lastDecision === null
          ? "nothing to undo"
          : "undo is not yet supported: the decision log is append-only",
    });
  }

  async refreshProgress(): Promise<void> {
    if (!this.state.projectId) {
      return;
    }
    try {
      this.update({ progress: await this.api.progress(this.state.projectId) });
    } catch {
      // stale dashboard data is tolerated
    }
  }

  // --- resume ------------------------------------------------------------------------

  /** Rebuild the phase from server state (page reload mid-session). */
  async resume(projectId?: string): Promise<boolean> {
    const id = projectId ?? this.storage?.get(PROJECT_KEY) ?? null;
    if (!id) {
      return false;
    }
    try {
      const progress = await this.api.progress(id);
      this.update({
        projectId: id,
        projectName: progress.name,
        progress,
        error: null,
      });
      if (progress.n_total === 0) {
        this.update({ phase: "setup" });
      } else if (progress.last_model_version === 0) {
        this.update({
          phase: "priors",
          upload: {
            n_records: progress.n_total,
            n_rejected: 0,
            format: "",
          },
        });
        void this.refreshSuggestions();
      } else {
        this.update({ phase: "screening" });
        await this.fetchNext();
      }
      return true;
    } catch {
      this.storage?.remove(PROJECT_KEY);
      return false;
    }
  }

  handleKey(key: string): void {
    if (this.state.phase !== "screening" && this.state.phase !== "finished") {
      return;
    }
    switch (key.toLowerCase()) {
      case "r":
        void this.decide(1);
        break;
      case "i":
        void this.decide(0);
        break;
      case "u":
        this.undoLast();
        break;
    }
  }

  exportUrl(format: "csv" | "ris"): string | null {
    return this.state.projectId ? this.api.exportUrl(this.state.projectId, format) : null;
  }
}

function initialState(): SessionState {
  return {
    phase: "setup",
    projectId: null,
    projectName: "",
    upload: null,
    error: null,
    notice: null,
    searchQuery: "",
    searchHits: [],
    suggestions: [],
    priorIncluded: new Map(),
    priorExcluded: new Map(),
    current: null,
    decisionPending: false,
    progress: null,
    lastDecision: null,
  };
}
