/**
 * In-memory stand-in for the scoring service, seeded with response
 * bodies recorded from the real service (tools/record_console_fixtures.py
 * in the repository root). It exposes a fetch-compatible function, so
 * the real ApiClient runs against it unchanged.
 *
 * Decision recording and the agreement report are live (they mirror the
 * service's committee-vs-model counting and kappa arithmetic); the
 * contract test asserts the final agreement equals the recorded body,
 * so this mock cannot drift from the wire format unnoticed.
 */

import type {
  AgreementMatrix,
  AgreementResponse,
  QueueItem,
  QueueResponse,
  SessionView,
  Verdict,
  WhatIfResponse,
} from "../src/api.js";

export interface Fixture {
  session: SessionView;
  queue: QueueResponse;
  votes: Record<string, Verdict>;
  whatif_same_alpha: WhatIfResponse;
  whatif_zero_alpha: WhatIfResponse;
  conflict: { status: number; body: { detail: string } };
  agreement_final: AgreementResponse;
  session_final: SessionView;
}

function jsonResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: String(status),
    json: () => Promise.resolve(body),
  } as unknown as Response;
}

export class FixtureService {
  readonly requests: string[] = [];
  private readonly items: Map<string, QueueItem>;
  private readonly session: SessionView;

  constructor(private readonly fixture: Fixture) {
    this.session = structuredClone(fixture.session);
    this.items = new Map(
      structuredClone(fixture.queue.items).map((item) => [item.record_id, item]),
    );
  }

  /** Bindable fetch-compatible entry point. */
  fetch = (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const target = new URL(url, "http://fixture");
    this.requests.push(`${method} ${target.pathname}${target.search}`);
    const sid = this.session.session_id;

    if (method === "GET" && target.pathname === "/healthz") {
      return Promise.resolve(jsonResponse(200, { status: "ok" }));
    }
    if (target.pathname === `/sessions/${sid}`) {
      return Promise.resolve(jsonResponse(200, this.sessionView()));
    }
    if (target.pathname === `/sessions/${sid}/queue`) {
      return Promise.resolve(
        jsonResponse(200, {
          session: this.sessionView(),
          importances: this.fixture.queue.importances,
          items: [...this.items.values()].map((item) => structuredClone(item)),
        }),
      );
    }
    if (method === "POST" && target.pathname === `/sessions/${sid}/decisions`) {
      const body = JSON.parse(String(init?.body)) as {
        record_id: string;
        decision: Verdict;
        note: string | null;
      };
      return Promise.resolve(this.recordDecision(body));
    }
    if (target.pathname === `/sessions/${sid}/agreement`) {
      return Promise.resolve(this.agreement());
    }
    if (target.pathname === `/sessions/${sid}/whatif`) {
      const alpha = Number(target.searchParams.get("alpha"));
      if (alpha < 0) return Promise.resolve(jsonResponse(400, { detail: "alpha must be >= 0" }));
      if (alpha === this.fixture.whatif_same_alpha.alpha) {
        return Promise.resolve(jsonResponse(200, structuredClone(this.fixture.whatif_same_alpha)));
      }
      if (alpha === this.fixture.whatif_zero_alpha.alpha) {
        return Promise.resolve(jsonResponse(200, structuredClone(this.fixture.whatif_zero_alpha)));
      }
      return Promise.resolve(jsonResponse(400, { detail: `no recorded what-if for alpha ${alpha}` }));
    }
    return Promise.resolve(jsonResponse(404, { detail: `unknown route ${method} ${target.pathname}` }));
  };

  private sessionView(): SessionView {
    const decided = [...this.items.values()].filter((item) => item.decided).length;
    return {
      ...structuredClone(this.session),
      counts: { cases: this.items.size, decided, remaining: this.items.size - decided },
    };
  }

  private recordDecision(body: { record_id: string; decision: Verdict; note: string | null }): Response {
    const item = this.items.get(body.record_id);
    if (!item) {
      return jsonResponse(404, { detail: `no case '${body.record_id}' in session` });
    }
    if (item.decided) {
      return jsonResponse(409, structuredClone(this.fixture.conflict.body));
    }
    item.decided = true;
    item.committee_decision = body.decision;
    item.committee_note = body.note;
    item.decided_at = item.model?.scored_at ?? null;
    return jsonResponse(201, structuredClone(item));
  }

  /** Committee-vs-model convention: fp = committee gave, model did not. */
  private agreementMatrix(): AgreementMatrix {
    const matrix = { tp: 0, fp: 0, fn: 0, tn: 0 };
    for (const item of this.items.values()) {
      if (!item.decided || item.committee_decision === null || !item.model) continue;
      const committee = item.committee_decision;
      const model = item.model.decision;
      if (committee === 1 && model === 1) matrix.tp += 1;
      else if (committee === 1 && model === 0) matrix.fp += 1;
      else if (committee === 0 && model === 1) matrix.fn += 1;
      else matrix.tn += 1;
    }
    return matrix;
  }

  private agreement(): Response {
    const view = this.sessionView();
    if (view.counts.decided === 0) {
      return jsonResponse(400, { detail: "no decided entries yet; agreement report is empty" });
    }
    const m = this.agreementMatrix();
    const n = m.tp + m.fp + m.fn + m.tn;
    const p0 = (m.tp + m.tn) / n;
    const p1 = ((m.tp + m.fn) * (m.tp + m.fp)) / (n * n);
    const p2 = ((m.tn + m.fn) * (m.tn + m.fp)) / (n * n);
    const pe = p1 + p2;
    if (pe >= 1) {
      return jsonResponse(200, {
        session_id: view.session_id,
        counts: view.counts,
        matrix: m,
        p0,
        p1: null,
        p2: null,
        pe: 1.0,
        kappa: null,
        band: null,
        degenerate: "both raters are constant (chance agreement is 1); kappa is undefined",
      });
    }
    const kappa = (p0 - pe) / (1 - pe);
    const band = kappa >= 0.8 ? "almost perfect" : kappa >= 0.6 ? "substantial" : kappa >= 0.4 ? "moderate" : kappa >= 0.2 ? "fair" : kappa >= 0 ? "slight" : "poor (worse than chance)";
    return jsonResponse(200, {
      session_id: view.session_id,
      counts: view.counts,
      matrix: m,
      p0,
      p1,
      p2,
      pe,
      kappa,
      band,
    });
  }
}
