/** Triage screen: confirm or dismiss leak hits, allow or redact detected
 * entity surfaces. A conflicting entity verdict surfaces the server's 409
 * with both sides shown.
 */

import { Api, ApiError } from "./api.js";
import type { ConflictBody, EntityCandidate, EntityVerdict, LeakHit, LeakVerdict } from "./types.js";

type LeakQueueItem = LeakHit & { context: string };

export class TriageView {
  private hits: LeakQueueItem[] = [];
  private hitsRemaining = 0;
  private candidates: EntityCandidate[] = [];
  private conflict: { surface: string; body: ConflictBody } | null = null;
  private errorMessage: string | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: Api,
  ) {}

  async mount(): Promise<void> {
    await this.refresh();
  }

  unmount(): void {}

  async refresh(): Promise<void> {
    const queue = await this.api.queue<LeakQueueItem>("leak_triage", 50);
    this.hits = queue.items;
    this.hitsRemaining = queue.remaining;
    const entities = await this.api.entityCandidates();
    this.candidates = entities.candidates;
    this.render();
  }

  private async verdictHit(hitId: string, verdict: LeakVerdict): Promise<void> {
    try {
      await this.api.leakVerdict(hitId, verdict);
      this.hits = this.hits.filter((hit) => hit.id !== hitId);
      this.hitsRemaining -= 1;
      this.errorMessage = null;
    } catch (error) {
      this.errorMessage = error instanceof Error ? error.message : String(error);
    }
    this.render();
  }

  private async verdictEntity(surface: string, verdict: EntityVerdict): Promise<void> {
    this.conflict = null;
    try {
      await this.api.entityVerdict(surface, verdict);
      this.candidates = this.candidates.map((c) =>
        c.surface === surface ? { ...c, verdict } : c,
      );
      this.errorMessage = null;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.conflict = { surface, body: error.body as ConflictBody };
      } else {
        this.errorMessage = error instanceof Error ? error.message : String(error);
      }
    }
    this.render();
  }

  private render(): void {
    this.root.textContent = "";

    if (this.hits.length === 0 && this.candidates.length === 0) {
      this.root.append(el("div", "zero-state", "Nothing to triage."));
      return;
    }

    if (this.errorMessage !== null) {
      this.root.append(el("div", "banner", this.errorMessage));
    }
    if (this.conflict !== null) {
      const { surface, body } = this.conflict;
      this.root.append(
        el(
          "div",
          "conflict",
          `conflicting verdicts for "${surface}": existing ${body.existing}, requested ${body.requested}`,
        ),
      );
    }

    const hitsSection = el("section", "leak-hits");
    hitsSection.append(el("h2", "", `Leak hits (${this.hitsRemaining} pending)`));
    for (const hit of this.hits) {
      const row = el("div", "hit");
      row.dataset.hitId = hit.id;
      row.append(
        el("span", "kind", hit.kind),
        el("span", "surface", hit.surface),
        el("span", "similarity", hit.similarity.toFixed(3)),
      );
      const context = document.createElement("code");
      context.className = "context";
      context.textContent = hit.context;
      row.append(context);
      row.append(
        button("confirm", () => void this.verdictHit(hit.id, "confirmed")),
        button("dismiss", () => void this.verdictHit(hit.id, "dismissed")),
      );
      hitsSection.append(row);
    }
    this.root.append(hitsSection);

    const entitySection = el("section", "entity-candidates");
    entitySection.append(el("h2", "", "Entity candidates"));
    for (const candidate of this.candidates) {
      const row = el("div", "candidate");
      row.dataset.surface = candidate.surface;
      row.append(
        el("span", "surface", candidate.surface),
        el("span", "frequency", String(candidate.frequency)),
      );
      if (candidate.verdict) {
        row.append(el("span", "verdict", candidate.verdict));
      }
      row.append(
        button("allow", () => void this.verdictEntity(candidate.surface, "allow")),
        button("redact", () => void this.verdictEntity(candidate.surface, "redact")),
      );
      entitySection.append(row);
    }
    this.root.append(entitySection);
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const node = document.createElement("button");
  node.textContent = label;
  node.addEventListener("click", onClick);
  return node;
}
