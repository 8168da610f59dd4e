/**
 * Session dashboard state. Holds the queue, the live agreement report,
 * and what-if exploration results. All numbers are service-sourced: a
 * submit optimistically locks the row, then reconciles with the
 * service's item view and refreshes the agreement report; a conflict
 * (someone else decided first) refreshes the queue and surfaces the
 * error without corrupting local state.
 */

import {
  AgreementResponse,
  ApiClient,
  ApiError,
  QueueItem,
  SessionView,
  Verdict,
  WhatIfCase,
  WhatIfResponse,
} from "./api.js";

export interface WhatIfState {
  alpha: number;
  flips: number;
  byRecord: Map<string, WhatIfCase>;
}

export class SessionDashboard {
  session: SessionView | null = null;
  items: QueueItem[] = [];
  importances: { feature: string; share: number }[] | null = null;
  /** null until the first verdict is recorded */
  agreement: AgreementResponse | null = null;
  whatIf: WhatIfState | null = null;
  lastError: string | null = null;

  private pending = new Set<string>();

  constructor(
    private readonly client: ApiClient,
    readonly sessionId: string,
  ) {}

  async load(): Promise<void> {
    const queue = await this.client.getQueue(this.sessionId);
    this.session = queue.session;
    this.items = queue.items;
    this.importances = queue.importances;
    await this.refreshAgreement();
  }

  item(recordId: string): QueueItem | undefined {
    return this.items.find((item) => item.record_id === recordId);
  }

  get decidedCount(): number {
    return this.session?.counts.decided ?? 0;
  }

  get remainingCount(): number {
    return this.session?.counts.remaining ?? 0;
  }

  /** Kappa is shown only once at least one verdict is recorded. */
  get kappa(): number | null {
    return this.agreement?.kappa ?? null;
  }

  get kappaBand(): string | null {
    return this.agreement?.band ?? null;
  }

  isPending(recordId: string): boolean {
    return this.pending.has(recordId);
  }

  private async refreshAgreement(): Promise<void> {
    if (!this.session || this.session.counts.decided === 0) {
      this.agreement = null;
      return;
    }
    this.agreement = await this.client.getAgreement(this.sessionId);
  }

  private async refreshSession(): Promise<void> {
    this.session = await this.client.getSession(this.sessionId);
  }

  async submit(recordId: string, verdict: Verdict, note?: string): Promise<boolean> {
    const item = this.item(recordId);
    if (!item) {
      this.lastError = `unknown case ${recordId}`;
      return false;
    }
    if (item.decided || this.pending.has(recordId)) {
      this.lastError = `case ${recordId} is already decided`;
      return false;
    }
    this.pending.add(recordId);
    try {
      const decided = await this.client.submitDecision(this.sessionId, recordId, verdict, note);
      this.items = this.items.map((it) => (it.record_id === recordId ? decided : it));
      await this.refreshSession();
      await this.refreshAgreement();
      this.lastError = null;
      return true;
    } catch (error) {
      if (error instanceof ApiError && error.isConflict) {
        // lost the race: resync everything from the service and surface it
        await this.load();
        this.lastError = error.detail;
        return false;
      }
      this.lastError = error instanceof Error ? error.message : String(error);
      return false;
    } finally {
      this.pending.delete(recordId);
    }
  }

  async exploreAlpha(alpha: number): Promise<WhatIfState> {
    const response: WhatIfResponse = await this.client.whatIf(this.sessionId, alpha);
    this.whatIf = {
      alpha: response.alpha,
      flips: response.flips,
      byRecord: new Map(response.cases.map((c) => [c.record_id, c])),
    };
    return this.whatIf;
  }

  clearWhatIf(): void {
    this.whatIf = null;
  }

  /** Record ids whose recommendation flips at the explored rate. */
  flippedRecords(): string[] {
    if (!this.whatIf) return [];
    return [...this.whatIf.byRecord.values()].filter((c) => c.flipped).map((c) => c.record_id);
  }
}
