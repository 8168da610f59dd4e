/**
 * Typed client for the scoring-service HTTP API (see docs/api.md in the
 * repository root). Every displayed number on the console comes from
 * these responses; the client performs no model or kappa arithmetic.
 */

export type Verdict = 0 | 1;

export interface SessionCounts {
  cases: number;
  decided: number;
  remaining: number;
}

export interface SessionView {
  session_id: string;
  created_at: string;
  alpha: number;
  model: { name: string; fingerprint: string };
  cost_params: { alpha: number; mr: number; admin_cost: number; fp_variant: string };
  blind: boolean;
  status: "open" | "closed";
  counts: SessionCounts;
}

export interface ModelPanel {
  probability: number;
  threshold: number;
  decision: Verdict;
  recommendation: "give" | "deny";
  c_fp: string;
  c_fn: string;
  scored_at: string;
}

export interface QueueItem {
  record_id: string;
  features: Record<string, number | string | null>;
  decided: boolean;
  committee_decision: Verdict | null;
  committee_note: string | null;
  decided_at: string | null;
  /** null while undecided in blind sessions */
  model: ModelPanel | null;
}

export interface QueueResponse {
  session: SessionView;
  importances: { feature: string; share: number }[] | null;
  items: QueueItem[];
}

export interface AgreementMatrix {
  tp: number;
  fp: number;
  fn: number;
  tn: number;
}

export interface AgreementResponse {
  session_id: string;
  counts: SessionCounts;
  matrix: AgreementMatrix;
  p0: number;
  p1: number | null;
  p2: number | null;
  pe: number;
  kappa: number | null;
  band: string | null;
  degenerate?: string;
}

export interface WhatIfCase {
  record_id: string;
  c_fp: string;
  c_fn: string;
  threshold: number;
  decision: Verdict;
  recommendation: "give" | "deny";
  flipped: boolean;
}

export interface WhatIfResponse {
  session_id: string;
  alpha: number;
  flips: number;
  cases: WhatIfCase[];
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string | null = null,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private headers(hasBody: boolean): Record<string, string> {
    const headers: Record<string, string> = {};
    if (hasBody) headers["Content-Type"] = "application/json";
    if (this.token !== null) headers["X-API-Token"] = this.token;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(body !== undefined),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      const detail =
        typeof payload === "object" && payload !== null && "detail" in payload
          ? String((payload as { detail: unknown }).detail)
          : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return payload as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  openSession(body: {
    alpha: number;
    model: string;
    case_ids: string[];
    blind?: boolean;
  }): Promise<SessionView> {
    return this.request("POST", "/sessions", body);
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  getQueue(sessionId: string): Promise<QueueResponse> {
    return this.request("GET", `/sessions/${sessionId}/queue`);
  }

  submitDecision(sessionId: string, recordId: string, decision: Verdict, note?: string): Promise<QueueItem> {
    return this.request("POST", `/sessions/${sessionId}/decisions`, {
      record_id: recordId,
      decision,
      note: note ?? null,
    });
  }

  getAgreement(sessionId: string): Promise<AgreementResponse> {
    return this.request("GET", `/sessions/${sessionId}/agreement`);
  }

  whatIf(sessionId: string, alpha: number): Promise<WhatIfResponse> {
    return this.request("GET", `/sessions/${sessionId}/whatif?alpha=${encodeURIComponent(alpha)}`);
  }

  closeSession(sessionId: string): Promise<SessionView> {
    return this.request("POST", `/sessions/${sessionId}/close`);
  }
}
