/** Labeling screen for annotation and post-hoc review queues.
 *
 * Keyboard: 1 and 0 submit a label, space skips (or advances past the
 * post-submission reveal). A failed POST keeps the entered label and shows
 * a retry banner; nothing is dropped silently. In post-hoc mode the model
 * probability stays out of the DOM until the label is submitted.
 */

import { Api } from "./api.js";
import type { QueueItem } from "./types.js";

export interface AnnotationOptions {
  task: "annotation" | "posthoc";
  annotator: string;
  status?: "single" | "consensus";
  revealProbability?: "after-submit" | "always";
  batchSize?: number;
}

export class AnnotationView {
  private items: QueueItem[] = [];
  private remaining = 0;
  private revealed = false;
  private pendingLabel: 0 | 1 | null = null;
  private errorMessage: string | null = null;
  private busy = false;
  private loaded = false;
  private readonly onKey = (event: KeyboardEvent) => this.handleKey(event);

  constructor(
    private readonly root: HTMLElement,
    private readonly api: Api,
    private readonly options: AnnotationOptions,
  ) {}

  async mount(): Promise<void> {
    window.addEventListener("keydown", this.onKey);
    await this.refill();
    this.loaded = true;
    this.render();
  }

  unmount(): void {
    window.removeEventListener("keydown", this.onKey);
  }

  private current(): QueueItem | undefined {
    return this.items[0];
  }

  private async refill(): Promise<void> {
    const response = await this.api.queue(this.options.task, this.options.batchSize ?? 20);
    this.items = response.items;
    this.remaining = response.remaining;
  }

  private handleKey(event: KeyboardEvent): void {
    const target = event.target;
    if (target instanceof HTMLInputElement || target instanceof HTMLTextAreaElement) {
      return;
    }
    if (event.key === "1" || event.key === "0") {
      event.preventDefault();
      void this.submit(event.key === "1" ? 1 : 0);
    } else if (event.key === " ") {
      event.preventDefault();
      if (this.revealed) {
        void this.advance();
      } else {
        this.skip();
      }
    }
  }

  private async submit(label: 0 | 1): Promise<void> {
    const item = this.current();
    if (!item || this.busy || this.revealed) return;
    this.pendingLabel = label;
    this.busy = true;
    this.render();
    try {
      await this.api.postLabel({
        doc_id: item.doc_id,
        label,
        annotator: this.options.annotator,
        status: this.options.status ?? "single",
      });
      this.pendingLabel = null;
      this.errorMessage = null;
      this.remaining -= 1;
      if (this.options.task === "posthoc" && this.revealMode() === "after-submit") {
        this.revealed = true;
      } else {
        await this.advance();
        return;
      }
    } catch (error) {
      this.errorMessage = error instanceof Error ? error.message : String(error);
    } finally {
      this.busy = false;
      this.render();
    }
  }

  private async advance(): Promise<void> {
    this.items.shift();
    this.revealed = false;
    this.busy = false;
    if (this.items.length === 0 && this.remaining > 0) {
      await this.refill();
    }
    this.render();
  }

  private skip(): void {
    if (this.items.length > 1) {
      const head = this.items.shift();
      if (head) this.items.push(head);
    }
    this.render();
  }

  private revealMode(): "after-submit" | "always" {
    return this.options.revealProbability ?? "after-submit";
  }

  private render(): void {
    this.root.textContent = "";
    const item = this.current();

    if (this.loaded && !item) {
      const done = el("div", "completion");
      done.append(el("p", "", "Queue complete. Every item has a label."));
      const link = document.createElement("a");
      link.href = "/api/labels/export";
      link.textContent = "export labels";
      done.append(link);
      this.root.append(done);
      return;
    }

    const counter = el("div", "progress", `remaining: ${this.remaining}`);
    this.root.append(counter);
    if (!item) return;

    this.root.append(el("div", "doc-id", item.doc_id));
    const summary = document.createElement("pre");
    summary.className = "summary";
    summary.textContent = item.summary_text;
    this.root.append(summary);

    if (this.options.task === "posthoc") {
      const show = this.revealMode() === "always" || this.revealed;
      if (show && item.probability != null) {
        const prob = el("div", "probability", `model probability: ${item.probability.toFixed(2)}`);
        prob.dataset.probability = item.probability.toFixed(4);
        this.root.append(prob);
      } else {
        this.root.append(el("div", "probability-hidden", "model probability hidden until you submit"));
      }
    }

    if (this.errorMessage !== null && this.pendingLabel !== null) {
      const banner = el("div", "banner", `label not saved: ${this.errorMessage}`);
      banner.dataset.pendingLabel = String(this.pendingLabel);
      const retry = button("retry", () => {
        if (this.pendingLabel !== null) void this.submit(this.pendingLabel);
      });
      banner.append(retry);
      this.root.append(banner);
    }

    const controls = el("div", "controls");
    if (this.revealed) {
      controls.append(button("next", () => void this.advance()));
    } else {
      controls.append(
        button("label 0", () => void this.submit(0)),
        button("label 1", () => void this.submit(1)),
        button("skip", () => this.skip()),
      );
    }
    this.root.append(controls);
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
