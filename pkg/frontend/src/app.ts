/** Console shell: header with annotator name, tab navigation, one active
 * view at a time. Served as static files by the review service.
 */

import { Api } from "./api.js";
import { AnnotationView } from "./annotation.js";
import { CalibrationView } from "./calibration.js";
import { TriageView } from "./triage.js";

interface View {
  mount(): Promise<void>;
  unmount(): void;
}

const TAB_NAMES = ["annotate", "post-hoc", "triage", "calibration"] as const;
type TabName = (typeof TAB_NAMES)[number];

export class App {
  private active: View | null = null;
  private container!: HTMLElement;
  private annotator: string;

  constructor(private readonly api: Api = new Api()) {
    this.annotator = localStorage.getItem("textveil-annotator") ?? "console";
  }

  mount(root: HTMLElement): void {
    root.textContent = "";

    const header = document.createElement("header");
    const title = document.createElement("h1");
    title.textContent = "textveil console";
    header.append(title);

    const nameInput = document.createElement("input");
    nameInput.value = this.annotator;
    nameInput.placeholder = "annotator";
    nameInput.addEventListener("change", () => {
      this.annotator = nameInput.value || "console";
      localStorage.setItem("textveil-annotator", this.annotator);
    });
    header.append(nameInput);

    const health = document.createElement("span");
    health.className = "health";
    header.append(health);
    this.api
      .health()
      .then((h) => {
        health.textContent = `${h.corpus_size} documents`;
      })
      .catch(() => {
        health.textContent = "service unreachable";
      });
    root.append(header);

    const nav = document.createElement("nav");
    for (const name of TAB_NAMES) {
      const tab = document.createElement("button");
      tab.textContent = name;
      tab.addEventListener("click", () => void this.switchTo(name));
      nav.append(tab);
    }
    root.append(nav);

    this.container = document.createElement("main");
    root.append(this.container);
    void this.switchTo("annotate");
  }

  private async switchTo(name: TabName): Promise<void> {
    this.active?.unmount();
    this.container.textContent = "";
    if (name === "annotate") {
      this.active = new AnnotationView(this.container, this.api, {
        task: "annotation",
        annotator: this.annotator,
      });
    } else if (name === "post-hoc") {
      this.active = new AnnotationView(this.container, this.api, {
        task: "posthoc",
        annotator: this.annotator,
      });
    } else if (name === "triage") {
      this.active = new TriageView(this.container, this.api);
    } else {
      this.active = new CalibrationView(this.container, this.api);
    }
    await this.active.mount();
  }
}

const rootElement = typeof document === "undefined" ? null : document.getElementById("app");
if (rootElement) {
  new App().mount(rootElement);
}
