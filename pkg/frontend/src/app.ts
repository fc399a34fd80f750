/** DOM wiring for the assessment tool: sample list, highlighted attribution
 * view, judgment form, and the aggregate statistics panel. All computation
 * happens server-side; this file is presentation and input only. */

import { ApiError, ReviewApi } from "./api.js";
import { segmentBody } from "./highlight.js";
import { summaryRows } from "./format.js";
import { ERROR_CATEGORIES, type SamplePayload } from "./types.js";

type Child = Node | string;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function clear(node: HTMLElement): HTMLElement {
  node.replaceChildren();
  return node;
}

export class App {
  private current: SamplePayload | null = null;

  constructor(
    private readonly api: ReviewApi,
    private readonly root: HTMLElement,
  ) {}

  private annotator(): string {
    const input = this.root.querySelector<HTMLInputElement>("#annotator-id");
    return input?.value.trim() || "anonymous";
  }

  async start(): Promise<void> {
    this.root.append(
      el(
        "header",
        {},
        el("h1", {}, "Attribution review"),
        el(
          "div",
          { class: "toolbar" },
          el("label", {}, "Annotator ", el("input", { id: "annotator-id", value: "anonymous" })),
          this.hopFilter(),
          this.statusFilter(),
        ),
      ),
      el(
        "main",
        {},
        el("nav", { id: "sample-list" }),
        el("section", { id: "sample-view" }, el("p", {}, "Pick a sample to review.")),
        el("aside", { id: "summary-panel" }),
      ),
    );
    this.root.querySelector("#annotator-id")!.addEventListener("change", () => this.refreshList());
    await this.refreshList();
    await this.refreshSummary();
  }

  private hopFilter(): HTMLElement {
    const select = el("select", { id: "hop-filter" }, el("option", { value: "" }, "all hops"));
    for (const hop of [2, 3, 4]) {
      select.append(el("option", { value: String(hop) }, `${hop}-hop`));
    }
    select.addEventListener("change", () => this.refreshList());
    return el("label", {}, "Hops ", select);
  }

  private statusFilter(): HTMLElement {
    const select = el(
      "select",
      { id: "status-filter" },
      el("option", { value: "" }, "all"),
      el("option", { value: "unannotated" }, "unannotated"),
      el("option", { value: "annotated" }, "annotated"),
    );
    select.addEventListener("change", () => this.refreshList());
    return el("label", {}, "Status ", select);
  }

  async refreshList(): Promise<void> {
    const hop = this.root.querySelector<HTMLSelectElement>("#hop-filter")?.value;
    const status = this.root.querySelector<HTMLSelectElement>("#status-filter")?.value as
      | ""
      | "annotated"
      | "unannotated"
      | undefined;
    const page = await this.api.listSamples({
      hop: hop ? Number(hop) : undefined,
      status: status || undefined,
      annotator: this.annotator(),
      pageSize: 200,
    });
    const list = clear(this.root.querySelector<HTMLElement>("#sample-list")!);
    list.append(el("h2", {}, `Samples (${page.total})`));
    for (const sample of page.samples) {
      const button = el(
        "button",
        { class: sample.annotated ? "sample done" : "sample" },
        `${sample.id} · ${sample.hop_count}-hop${sample.annotated ? " ✓" : ""}`,
      );
      button.addEventListener("click", () => void this.showSample(sample.id));
      list.append(button);
    }
  }

  async showSample(id: string): Promise<void> {
    const sample = await this.api.getSample(id);
    this.current = sample;
    const view = clear(this.root.querySelector<HTMLElement>("#sample-view")!);

    view.append(
      el("h2", {}, sample.question),
      el("p", { class: "answers" }, `Gold answer: ${sample.answer} · Chain answer: ${sample.chain_answer}`),
    );

    const stepList = el("ol", { class: "steps" });
    for (const step of sample.steps) {
      const cites = step.citations.map((c) => `[${c}]`).join(" ");
      stepList.append(el("li", {}, `${step.claim} `, el("span", { class: "cite" }, cites)));
    }
    view.append(el("h3", {}, "Reasoning steps"), stepList);

    const docList = el("div", { class: "documents" });
    for (const doc of sample.documents) {
      const spans = sample.steps
        .flatMap((s) => s.quotes)
        .filter((q) => q.doc === doc.index)
        .map((q) => ({ start: q.start, end: q.end }));
      const body = el("p", { class: "doc-body" });
      for (const segment of segmentBody(doc.body, spans)) {
        body.append(
          segment.highlighted ? el("mark", {}, segment.text) : document.createTextNode(segment.text),
        );
      }
      docList.append(
        el(
          "article",
          { class: doc.is_supporting ? "doc supporting" : "doc" },
          el("h4", {}, `Document [${doc.index}] ${doc.title}${doc.is_supporting ? " · supporting" : ""}`),
          body,
        ),
      );
    }
    view.append(el("h3", {}, "Context documents"), docList, this.annotationForm());
  }

  private annotationForm(): HTMLElement {
    const category = el("select", { id: "category" }, el("option", { value: "" }, "choose category"));
    for (const name of ERROR_CATEGORIES) {
      category.append(el("option", { value: name }, name));
    }
    category.disabled = true;

    const faithfulYes = el("input", { type: "radio", name: "faithful", value: "yes", checked: "" });
    const faithfulNo = el("input", { type: "radio", name: "faithful", value: "no" });
    for (const radio of [faithfulYes, faithfulNo]) {
      radio.addEventListener("change", () => {
        category.disabled = faithfulYes.checked;
        if (faithfulYes.checked) category.value = "";
      });
    }
    const shortcut = el("input", { type: "checkbox", id: "shortcut" });
    const status = el("p", { id: "submit-status" });
    const submit = el("button", { class: "submit" }, "Submit judgment");
    submit.addEventListener("click", () => void this.submit(faithfulYes, category, shortcut, status));

    return el(
      "form",
      { class: "annotation", onsubmit: "return false" },
      el("h3", {}, "Judgment"),
      el("label", {}, faithfulYes, " faithful"),
      el("label", {}, faithfulNo, " unfaithful"),
      el("label", {}, "Error ", category),
      el("label", {}, shortcut, " question has a shortcut"),
      submit,
      status,
    );
  }

  private async submit(
    faithfulYes: HTMLInputElement,
    category: HTMLSelectElement,
    shortcut: HTMLInputElement,
    status: HTMLElement,
  ): Promise<void> {
    if (!this.current) return;
    const faithful = faithfulYes.checked;
    if (!faithful && !category.value) {
      status.textContent = "Pick an error category for an unfaithful chain.";
      return;
    }
    try {
      await this.api.submitAnnotation({
        sample_id: this.current.id,
        faithful,
        error_category: faithful ? null : (category.value as never),
        shortcut: shortcut.checked,
        annotator_id: this.annotator(),
      });
      status.textContent = "Saved.";
      await this.refreshList();
      await this.refreshSummary();
    } catch (error) {
      status.textContent = error instanceof ApiError ? error.message : String(error);
    }
  }

  async refreshSummary(): Promise<void> {
    const panel = clear(this.root.querySelector<HTMLElement>("#summary-panel")!);
    panel.append(el("h2", {}, "Statistics"));
    try {
      const summary = await this.api.getSummary();
      const table = el("table", {});
      for (const row of summaryRows(summary)) {
        table.append(el("tr", {}, el("td", {}, row.label), el("td", {}, row.value)));
      }
      panel.append(table);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        panel.append(el("p", {}, "No annotations yet."));
      } else {
        panel.append(el("p", {}, String(error)));
      }
    }
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const app = new App(new ReviewApi(""), document.getElementById("app")!);
  void app.start();
}
