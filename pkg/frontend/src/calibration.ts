/** Calibration dashboard: bin centers vs observed rates with Wilson
 * interval error bars, drawn as plain SVG. Empty bins never reach the
 * chart; an empty table renders a zero-state instead.
 */

import { Api } from "./api.js";
import type { CalibrationResponse } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const WIDTH = 560;
const HEIGHT = 300;
const MARGIN = 40;

export class CalibrationView {
  constructor(
    private readonly root: HTMLElement,
    private readonly api: Api,
  ) {}

  async mount(): Promise<void> {
    await this.refresh();
  }

  unmount(): void {}

  async refresh(): Promise<void> {
    const data = await this.api.calibration();
    this.render(data);
  }

  private render(data: CalibrationResponse): void {
    this.root.textContent = "";
    const rows = data.rows
      .filter((row) => row.n > 0)
      .slice()
      .sort((a, b) => a.bin_center - b.bin_center);

    if (rows.length === 0) {
      this.root.append(text("div", "zero-state", "No calibration data yet."));
      return;
    }

    const x = (v: number) => MARGIN + v * (WIDTH - 2 * MARGIN);
    const y = (v: number) => HEIGHT - MARGIN - v * (HEIGHT - 2 * MARGIN);

    const svg = document.createElementNS(SVG_NS, "svg");
    svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
    svg.setAttribute("class", "calibration-chart");

    const diagonal = document.createElementNS(SVG_NS, "line");
    diagonal.setAttribute("x1", String(x(0)));
    diagonal.setAttribute("y1", String(y(0)));
    diagonal.setAttribute("x2", String(x(1)));
    diagonal.setAttribute("y2", String(y(1)));
    diagonal.setAttribute("class", "reference");
    diagonal.setAttribute("stroke-dasharray", "4 4");
    svg.append(diagonal);

    for (const row of rows) {
      const bar = document.createElementNS(SVG_NS, "line");
      bar.setAttribute("class", "ci-bar");
      bar.setAttribute("x1", String(x(row.bin_center)));
      bar.setAttribute("x2", String(x(row.bin_center)));
      bar.setAttribute("y1", String(y(row.ci_low)));
      bar.setAttribute("y2", String(y(row.ci_high)));
      bar.setAttribute("data-ci-low", row.ci_low.toFixed(4));
      bar.setAttribute("data-ci-high", row.ci_high.toFixed(4));
      svg.append(bar);

      const point = document.createElementNS(SVG_NS, "circle");
      point.setAttribute("class", "bin-point");
      point.setAttribute("cx", String(x(row.bin_center)));
      point.setAttribute("cy", String(y(row.observed_rate)));
      point.setAttribute("r", "4");
      point.setAttribute("data-bin-center", String(row.bin_center));
      point.setAttribute("data-n", String(row.n));
      svg.append(point);
    }

    this.root.append(svg);
    this.root.append(text("div", "caption", `${data.n_scored} scored documents`));
    const refresh = document.createElement("button");
    refresh.textContent = "refresh";
    refresh.addEventListener("click", () => void this.refresh());
    this.root.append(refresh);
  }
}

function text(tag: string, className: string, content: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  node.textContent = content;
  return node;
}
