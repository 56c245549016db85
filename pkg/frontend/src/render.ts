/**
 * DOM view: builds the static skeleton once, then patches regions on every
 * state change. No framework; every handler delegates to a Store action.
 */

import type { ColumnSchema, PackageView } from "./api.js";
import type { AppState, Store } from "./state.js";
import { splitQuery, splitTopLevelAnd } from "./queryText.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function clear(node: Element): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

export class UiView {
  private datasetSelect!: HTMLSelectElement;
  private editor!: HTMLTextAreaElement;
  private diagnostics!: HTMLElement;
  private chips!: HTMLElement;
  private statusLine!: HTMLElement;
  private templateBody!: HTMLElement;
  private templateHead!: HTMLElement;
  private sessionControls!: HTMLElement;
  private suggestionPanel!: HTMLElement;
  private summaryBox!: HTMLElement;
  private noticeBar!: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly store: Store,
  ) {
    this.build();
    store.subscribe((state) => this.render(state));
  }

  private build(): void {
    const header = el("header");
    header.append(el("h1", {}, "package builder"));
    this.datasetSelect = el("select", { id: "dataset" });
    this.datasetSelect.addEventListener("change", () =>
      this.store.chooseDataset(this.datasetSelect.value),
    );
    const datasetLabel = el("label", {}, "dataset ");
    datasetLabel.append(this.datasetSelect);
    header.append(datasetLabel);
    this.noticeBar = el("div", { id: "notice", hidden: "" });
    header.append(this.noticeBar);

    const editorSection = el("section", { id: "editor-section" });
    this.editor = el("textarea", { id: "query", rows: "4", spellcheck: "false" });
    this.editor.addEventListener("input", () => this.store.setQueryText(this.editor.value));
    const runButton = el("button", { id: "run" }, "Run");
    runButton.addEventListener("click", () => void this.store.run());
    const exploreButton = el("button", { id: "explore" }, "Explore (new session)");
    exploreButton.addEventListener("click", () => void this.store.startSession());
    this.diagnostics = el("pre", { id: "diagnostics", hidden: "" });
    editorSection.append(this.editor, runButton, exploreButton, this.diagnostics);

    this.chips = el("div", { id: "chips" });
    this.statusLine = el("div", { id: "status" });

    const templateSection = el("section", { id: "template-section" });
    templateSection.append(el("h2", {}, "package template"));
    const help = el("details", { id: "help" });
    help.append(el("summary", {}, "help"));
    help.append(
      el(
        "p",
        {},
        "Click a cell to get constraint suggestions for that column. Chips " +
          "show each constraint; remove one with its x button. Chips cover " +
          "conjunctive constraints only: to write OR formulas, edit the " +
          "query text directly.",
      ),
    );
    templateSection.append(help, this.chips, this.statusLine);
    const tableWrap = el("div", { id: "table-wrap" });
    const table = el("table", { id: "template" });
    this.templateHead = el("thead");
    this.templateBody = el("tbody");
    table.append(this.templateHead, this.templateBody);
    tableWrap.append(table);
    this.sessionControls = el("div", { id: "session-controls" });
    templateSection.append(tableWrap, this.sessionControls);

    this.suggestionPanel = el("aside", { id: "suggestions" });

    const summarySection = el("section", { id: "summary-section" });
    summarySection.append(el("h2", {}, "visual summary"));
    this.summaryBox = el("div", { id: "summary" });
    summarySection.append(this.summaryBox);

    this.root.append(header, editorSection, templateSection, this.suggestionPanel, summarySection);
  }

  private render(state: AppState): void {
    this.renderDatasets(state);
    if (document.activeElement !== this.editor && this.editor.value !== state.queryText) {
      this.editor.value = state.queryText;
    }
    this.renderDiagnostics(state);
    this.renderNotice(state);
    this.renderChips(state);
    this.renderStatus(state);
    this.renderTemplate(state);
    this.renderSuggestions(state);
    this.renderSummary(state);
  }

  private renderDatasets(state: AppState): void {
    clear(this.datasetSelect);
    for (const dataset of state.datasets) {
      const option = el("option", { value: dataset.name }, `${dataset.name} (${dataset.rows})`);
      this.datasetSelect.append(option);
    }
    if (state.dataset) this.datasetSelect.value = state.dataset;
  }

  private renderDiagnostics(state: AppState): void {
    if (!state.diagnostics) {
      this.diagnostics.hidden = true;
      return;
    }
    const { code, message, position } = state.diagnostics;
    let text = `${code}: ${message}`;
    if (position) {
      text = `line ${position.line}, column ${position.column} - ${text}`;
      const line = state.queryText.split("\n")[position.line - 1];
      if (line !== undefined) {
        text += `\n${line}\n${" ".repeat(Math.max(0, position.column - 1))}^`;
      }
    }
    this.diagnostics.textContent = text;
    this.diagnostics.hidden = false;
  }

  private renderNotice(state: AppState): void {
    clear(this.noticeBar);
    if (!state.notice) {
      this.noticeBar.hidden = true;
      return;
    }
    this.noticeBar.hidden = false;
    this.noticeBar.append(el("span", {}, state.notice));
    if (state.timedOut) {
      const retry = el("button", { id: "retry" }, "retry");
      retry.addEventListener("click", () => void this.store.retry());
      this.noticeBar.append(retry);
    }
    const dismiss = el("button", { class: "dismiss" }, "x");
    dismiss.addEventListener("click", () => {
      this.noticeBar.hidden = true;
    });
    this.noticeBar.append(dismiss);
  }

  private chip(text: string, cssClass: string, onRemove?: () => void): HTMLElement {
    const chip = el("span", { class: `chip ${cssClass}` });
    chip.append(el("span", { class: "chip-text" }, text));
    if (onRemove) {
      const remove = el("button", { class: "chip-remove", title: "remove" }, "x");
      remove.addEventListener("click", onRemove);
      chip.append(remove);
    }
    return chip;
  }

  private renderChips(state: AppState): void {
    clear(this.chips);
    const canonical = state.parse?.canonicalText;
    if (!canonical) return;
    const parts = splitQuery(canonical);
    if (parts.repeat !== undefined) {
      this.chips.append(this.chip(`REPEAT ${parts.repeat}`, "chip-repeat"));
    }
    if (parts.where) {
      splitTopLevelAnd(parts.where).forEach((fragment, index) => {
        this.chips.append(
          this.chip(fragment, "chip-base", () => void this.store.removeChip("where", index)),
        );
      });
    }
    if (parts.suchThat) {
      splitTopLevelAnd(parts.suchThat).forEach((fragment, index) => {
        this.chips.append(
          this.chip(fragment, "chip-global", () => void this.store.removeChip("suchThat", index)),
        );
      });
    }
    if (parts.objective) {
      this.chips.append(
        this.chip(parts.objective, "chip-objective", () =>
          void this.store.removeChip("objective", 0),
        ),
      );
    }
  }

  private renderStatus(state: AppState): void {
    clear(this.statusLine);
    if (state.evaluating) {
      this.statusLine.textContent = "solving...";
      return;
    }
    const evaluation = state.evaluation;
    if (!evaluation) return;
    let text = `status: ${evaluation.status}`;
    if (evaluation.objective !== undefined) text += ` | objective: ${evaluation.objective}`;
    text += ` | cardinality bounds: [${evaluation.bounds.lower}, ${evaluation.bounds.upper ?? "unbounded"}]`;
    if (state.shownSource === "summary") text += " | showing a package picked in the summary";
    if (state.shownSource === "session") text += " | showing the exploration sample";
    this.statusLine.textContent = text;
  }

  private schemaColumns(state: AppState): ColumnSchema[] {
    const dataset = state.datasets.find((d) => d.name === state.dataset);
    return dataset ? dataset.schema.columns : [];
  }

  private renderTemplate(state: AppState): void {
    clear(this.templateHead);
    clear(this.templateBody);
    clear(this.sessionControls);
    const shown: PackageView | undefined = state.shownPackage;
    const columns = this.schemaColumns(state);
    const inSession = state.session !== undefined && state.shownSource === "session";

    const headRow = el("tr");
    if (inSession) headRow.append(el("th", {}, "pin"));
    headRow.append(el("th", {}, "x"));
    for (const column of columns) headRow.append(el("th", {}, column.name));
    this.templateHead.append(headRow);

    if (!shown) {
      const row = el("tr");
      row.append(
        el(
          "td",
          { colspan: String(columns.length + (inSession ? 2 : 1)), class: "empty" },
          "no package yet - run a query or start a session",
        ),
      );
      this.templateBody.append(row);
      return;
    }

    for (const tuple of shown.tuples) {
      const row = el("tr", { "data-tuple-id": String(tuple.id) });
      if (inSession) {
        const cell = el("td", { class: "pin-cell" });
        const pinned = state.session!.pinned[String(tuple.id)] !== undefined;
        const button = el(
          "button",
          { class: pinned ? "pin pinned" : "pin", title: pinned ? "unpin" : "pin" },
          pinned ? "pinned" : "pin",
        );
        button.disabled = state.busySession;
        button.addEventListener("click", () => void this.store.togglePin(tuple.id));
        cell.append(button);
        row.append(cell);
      }
      row.append(el("td", { class: "mult" }, `x${tuple.multiplicity}`));
      for (const column of columns) {
        const value = tuple.values[column.name];
        const cell = el("td", { class: "value-cell", "data-column": column.name }, String(value));
        cell.addEventListener("click", () =>
          void this.store.selectCell(column.name, value),
        );
        row.append(cell);
      }
      this.templateBody.append(row);
    }

    if (inSession) {
      const replace = el("button", { id: "replace-others" }, "Replace others");
      replace.disabled = state.busySession;
      replace.addEventListener("click", () => void this.store.replaceOthers());
      this.sessionControls.append(replace);
      this.sessionControls.append(
        el("span", { class: "hint" }, "pin the rows you like, then replace the rest"),
      );
    }
  }

  private renderSuggestions(state: AppState): void {
    clear(this.suggestionPanel);
    const suggestions = state.suggestions;
    if (!suggestions) return;
    const title = suggestions.value === undefined
      ? `suggestions for ${suggestions.column}`
      : `suggestions for ${suggestions.column} = ${suggestions.value}`;
    this.suggestionPanel.append(el("h2", {}, title));
    const list = el("ul");
    for (const item of suggestions.items) {
      const entry = el("li", { class: `suggestion ${item.kind}` });
      entry.append(el("code", {}, item.fragment));
      entry.append(el("p", {}, item.rationale));
      const accept = el("button", { class: "accept" }, "Accept");
      accept.addEventListener("click", () => void this.store.acceptSuggestion(item));
      entry.append(accept);
      list.append(entry);
    }
    this.suggestionPanel.append(list);
  }

  private renderSummary(state: AppState): void {
    clear(this.summaryBox);
    const summary = state.summary;
    if (!summary || summary.points.length === 0) {
      this.summaryBox.append(el("p", { class: "empty" }, "run a query to see the package space"));
      return;
    }
    const width = 460;
    const height = 300;
    const pad = 48;
    const xs = summary.points.map((p) => p.x);
    const ys = summary.points.map((p) => p.y);
    const xMin = Math.min(...xs);
    const xMax = Math.max(...xs);
    const yMin = Math.min(...ys);
    const yMax = Math.max(...ys);
    const sx = (x: number) =>
      xMax === xMin ? width / 2 : pad + ((x - xMin) / (xMax - xMin)) * (width - 2 * pad);
    const sy = (y: number) =>
      yMax === yMin ? height / 2 : height - pad - ((y - yMin) / (yMax - yMin)) * (height - 2 * pad);

    const ns = "http://www.w3.org/2000/svg";
    const svg = document.createElementNS(ns, "svg");
    svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
    svg.setAttribute("width", String(width));
    svg.setAttribute("height", String(height));

    const axis = document.createElementNS(ns, "path");
    axis.setAttribute(
      "d",
      `M ${pad} ${pad / 2} L ${pad} ${height - pad} L ${width - pad / 2} ${height - pad}`,
    );
    axis.setAttribute("class", "axis");
    svg.append(axis);

    const xLabel = document.createElementNS(ns, "text");
    xLabel.setAttribute("x", String(width / 2));
    xLabel.setAttribute("y", String(height - 8));
    xLabel.setAttribute("class", "axis-label x-label");
    xLabel.textContent = summary.dims.x;
    svg.append(xLabel);

    const yLabel = document.createElementNS(ns, "text");
    yLabel.setAttribute("x", "14");
    yLabel.setAttribute("y", String(height / 2));
    yLabel.setAttribute("transform", `rotate(-90 14 ${height / 2})`);
    yLabel.setAttribute("class", "axis-label y-label");
    yLabel.textContent = summary.dims.y;
    svg.append(yLabel);

    summary.points.forEach((point, index) => {
      const glyph = document.createElementNS(ns, "circle");
      glyph.setAttribute("cx", String(sx(point.x)));
      glyph.setAttribute("cy", String(sy(point.y)));
      glyph.setAttribute("r", "7");
      glyph.setAttribute(
        "class",
        index === state.selectedPoint ? "glyph selected" : "glyph",
      );
      const label = document.createElementNS(ns, "title");
      label.textContent = `${summary.dims.x} = ${point.x}, ${summary.dims.y} = ${point.y}`;
      glyph.append(label);
      glyph.addEventListener("click", () => this.store.selectSummaryPoint(index));
      svg.append(glyph);
    });

    this.summaryBox.append(svg);
  }
}
