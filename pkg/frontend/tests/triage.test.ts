import { afterEach, describe, expect, it } from "vitest";

import { Api } from "../src/api.js";
import { TriageView } from "../src/triage.js";
import { FakeBackend } from "./fake_backend.js";

afterEach(() => {
  document.body.textContent = "";
});

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

async function settle(): Promise<void> {
  await flush();
  await flush();
  await flush();
}

function triageBackend(): FakeBackend {
  const backend = new FakeBackend();
  backend.addDoc("doc-0", "Primary details were reviewed. Contact Maria Persson for details today.");
  backend.hits = [
    {
      id: "hit-00000",
      doc_id: "doc-0",
      kind: "name_exact",
      surface: "Maria Persson",
      start: 40,
      end: 53,
      similarity: 1.0,
    },
    {
      id: "hit-00001",
      doc_id: "doc-0",
      kind: "name_fuzzy",
      surface: "Maria Person",
      start: 40,
      end: 52,
      similarity: 0.923,
    },
  ];
  backend.entities.set("Capio Maria", 4);
  backend.entities.set("Beroendecentrum", 2);
  return backend;
}

async function mountView(backend: FakeBackend): Promise<HTMLElement> {
  const root = document.createElement("div");
  document.body.append(root);
  const view = new TriageView(root, new Api("", backend.fetch));
  await view.mount();
  return root;
}

function buttonIn(row: Element, label: string): HTMLButtonElement {
  const match = [...row.querySelectorAll("button")].find((b) => b.textContent === label);
  if (!match) throw new Error(`no "${label}" button in row`);
  return match;
}

describe("leak hit triage", () => {
  it("renders pending hits with context and posts verdicts", async () => {
    const backend = triageBackend();
    const root = await mountView(backend);

    const rows = root.querySelectorAll(".hit");
    expect(rows).toHaveLength(2);
    expect(root.querySelector("h2")?.textContent).toBe("Leak hits (2 pending)");
    expect(rows[0].querySelector(".context")?.textContent).toContain("Maria Persson");

    buttonIn(rows[0], "confirm").click();
    await settle();

    expect(backend.leakVerdicts.get("hit-00000")).toBe("confirmed");
    expect(root.querySelectorAll(".hit")).toHaveLength(1);
    expect(root.querySelector("h2")?.textContent).toBe("Leak hits (1 pending)");
  });

  it("dismiss posts the other verdict", async () => {
    const backend = triageBackend();
    const root = await mountView(backend);
    buttonIn(root.querySelectorAll(".hit")[1], "dismiss").click();
    await settle();
    expect(backend.leakVerdicts.get("hit-00001")).toBe("dismissed");
  });
});

describe("entity candidate review", () => {
  it("lists candidates by frequency and records an allow verdict", async () => {
    const backend = triageBackend();
    const root = await mountView(backend);

    const rows = root.querySelectorAll(".candidate");
    expect([...rows].map((r) => (r as HTMLElement).dataset.surface)).toEqual([
      "Capio Maria",
      "Beroendecentrum",
    ]);

    buttonIn(rows[0], "allow").click();
    await settle();

    expect(backend.entityVerdicts.get("Capio Maria")).toBe("allow");
    expect(backend.allowlistOverlay).toEqual(["Capio Maria"]);
    const updated = root.querySelector('[data-surface="Capio Maria"]');
    expect(updated?.querySelector(".verdict")?.textContent).toBe("allow");
  });

  it("repeating the same verdict does not duplicate the overlay entry", async () => {
    const backend = triageBackend();
    const root = await mountView(backend);
    buttonIn(root.querySelectorAll(".candidate")[0], "allow").click();
    await settle();
    buttonIn(root.querySelectorAll(".candidate")[0], "allow").click();
    await settle();
    expect(backend.allowlistOverlay).toEqual(["Capio Maria"]);
  });

  it("surfaces a conflicting verdict with both sides shown", async () => {
    const backend = triageBackend();
    backend.entityVerdicts.set("Capio Maria", "allow");
    const root = await mountView(backend);

    buttonIn(root.querySelector('[data-surface="Capio Maria"]')!, "redact").click();
    await settle();

    const conflict = root.querySelector(".conflict");
    expect(conflict?.textContent).toContain("Capio Maria");
    expect(conflict?.textContent).toContain("existing allow");
    expect(conflict?.textContent).toContain("requested redact");
    expect(backend.entityVerdicts.get("Capio Maria")).toBe("allow");
  });
});

describe("zero state", () => {
  it("shows a zero-state screen when there is nothing to triage", async () => {
    const backend = new FakeBackend();
    const root = await mountView(backend);
    expect(root.querySelector(".zero-state")?.textContent).toBe("Nothing to triage.");
  });
});
