/**
 * Browser entry point: binds the dashboard to the DOM. Session id, API
 * base, and token come from the URL: #/sessions/<id>?api=...&token=...
 */

import { ApiClient, QueueItem } from "./api.js";
import { SessionDashboard } from "./dashboard.js";
import { kappaLabel, money, percent, verdictLabel } from "./format.js";

function params(): { sessionId: string; api: string; token: string | null } {
  const hash = window.location.hash.replace(/^#\//, "");
  const [path, query = ""] = hash.split("?");
  const match = /^sessions\/([^/]+)$/.exec(path ?? "");
  const qs = new URLSearchParams(query);
  return {
    sessionId: match?.[1] ?? "",
    api: qs.get("api") ?? "",
    token: qs.get("token"),
  };
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderHeader(dash: SessionDashboard, root: HTMLElement): void {
  const header = el("header", "dashboard");
  const s = dash.session;
  if (!s) return;
  header.append(
    el("h1", "", `Session ${s.session_id}`),
    el("span", "pill", `alpha ${s.alpha}`),
    el("span", "pill", `model ${s.model.name}@${s.model.fingerprint}`),
    el("span", "pill", s.status),
    el("span", "count", `decided ${dash.decidedCount} / remaining ${dash.remainingCount}`),
  );
  const agreement = dash.agreement;
  if (agreement) {
    const m = agreement.matrix;
    header.append(
      el("span", "count", `TP ${m.tp} FP ${m.fp} FN ${m.fn} TN ${m.tn}`),
      el("span", "kappa", `kappa ${kappaLabel(agreement.kappa, agreement.band)}`),
    );
  }
  if (dash.lastError) header.append(el("div", "error", dash.lastError));
  root.append(header);
}

function renderWhatIf(dash: SessionDashboard, root: HTMLElement, rerender: () => void): void {
  const panel = el("section", "whatif");
  const slider = el("input") as HTMLInputElement;
  slider.type = "range";
  slider.min = "0";
  slider.max = "2";
  slider.step = "0.05";
  slider.value = String(dash.whatIf?.alpha ?? dash.session?.alpha ?? 0.2);
  const label = el("span", "", `what-if alpha ${slider.value}`);
  slider.addEventListener("change", () => {
    void dash.exploreAlpha(Number(slider.value)).then(rerender);
  });
  panel.append(label, slider);
  if (dash.whatIf) {
    panel.append(el("span", "flips", `${dash.whatIf.flips} recommendation flips`));
  }
  root.append(panel);
}

function renderItem(dash: SessionDashboard, item: QueueItem, rerender: () => void): HTMLElement {
  const row = el("article", item.decided ? "case decided" : "case");
  const flip = dash.whatIf?.byRecord.get(item.record_id);
  row.append(el("h2", "", item.record_id));
  const facts = el("dl", "features");
  for (const [name, value] of Object.entries(item.features)) {
    facts.append(el("dt", "", name), el("dd", "", String(value)));
  }
  row.append(facts);
  if (item.model) {
    row.append(
      el(
        "p",
        "model",
        `model: ${item.model.recommendation} p=${percent(item.model.probability)} ` +
          `t=${percent(item.model.threshold)} exposure ${money(item.model.c_fp)} ` +
          `foregone ${money(item.model.c_fn)}`,
      ),
    );
  } else {
    row.append(el("p", "model blind", "model hidden until your verdict (blind session)"));
  }
  if (flip?.flipped) {
    row.append(el("p", "flip", `flips to ${flip.recommendation} at alpha ${dash.whatIf?.alpha}`));
  }
  if (item.decided) {
    row.append(el("p", "verdict", `committee: ${verdictLabel(item.committee_decision)}`));
  } else {
    for (const verdict of [1, 0] as const) {
      const button = el("button", verdict ? "give" : "deny", verdict ? "give" : "deny");
      button.disabled = dash.isPending(item.record_id);
      button.addEventListener("click", () => {
        void dash.submit(item.record_id, verdict).then(rerender);
      });
      row.append(button);
    }
  }
  return row;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) return;
  const { sessionId, api, token } = params();
  if (!sessionId) {
    root.textContent = "open #/sessions/<id>?api=<base-url>&token=<token>";
    return;
  }
  const dash = new SessionDashboard(new ApiClient(api, token), sessionId);

  const rerender = (): void => {
    root.replaceChildren();
    renderHeader(dash, root);
    renderWhatIf(dash, root, rerender);
    const queue = el("main", "queue");
    for (const item of dash.items) queue.append(renderItem(dash, item, rerender));
    root.append(queue);
  };

  await dash.load();
  rerender();
}

void boot();
