// DOM rendering for the three panes. Pure function of UiState plus a handler
// bag; main.ts owns the elements and re-renders after every transition.

import { barWidths, selectedAnswer, type UiState } from "./state.js";
import { splitForHighlight } from "./highlight.js";

export interface Handlers {
  onSelect(index: number): void;
  onRetry(text: string): void;
}

export interface Panes {
  readonly chat: HTMLElement;
  readonly results: HTMLElement;
  readonly doc: HTMLElement;
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function renderChat(state: UiState, pane: HTMLElement, handlers: Handlers): void {
  pane.replaceChildren();
  for (const bubble of state.transcript) {
    const node = el("div", `bubble bubble-${bubble.role}`, bubble.text);
    if (bubble.role === "error" && state.pendingText !== null) {
      const retry = el("button", "retry", "retry") as HTMLButtonElement;
      const text = state.pendingText;
      retry.addEventListener("click", () => handlers.onRetry(text));
      node.appendChild(retry);
    }
    pane.appendChild(node);
  }
  if (state.busy) {
    pane.appendChild(el("div", "bubble bubble-system bubble-busy", "…"));
  }
  pane.scrollTop = pane.scrollHeight;
}

function renderResults(state: UiState, pane: HTMLElement, handlers: Handlers): void {
  pane.replaceChildren();
  if (state.answers.length === 0) {
    pane.appendChild(el("div", "placeholder", "Ask a question to see ranked matches."));
    return;
  }
  const widths = barWidths(state.answers);
  state.answers.forEach((answer, index) => {
    const item = el("div", index === state.selectedIndex ? "result selected" : "result");
    item.setAttribute("role", "option");
    const label = answer.answer_text ?? "(no extractable answer)";
    item.appendChild(el("div", "result-title", `${answer.rank}. ${answer.doc_id}`));
    item.appendChild(el("div", "result-answer", label));
    const bar = el("div", "bar");
    const fill = el("div", "bar-fill");
    fill.style.width = `${widths[index]}%`;
    bar.appendChild(fill);
    bar.appendChild(el("span", "bar-score", answer.combined_score.toFixed(3)));
    item.appendChild(bar);
    item.addEventListener("click", () => handlers.onSelect(index));
    pane.appendChild(item);
  });
}

function renderDoc(state: UiState, pane: HTMLElement): void {
  pane.replaceChildren();
  if (state.doc === null) {
    pane.appendChild(el("div", "placeholder", "The selected answer's document appears here."));
    return;
  }
  pane.appendChild(el("h2", "doc-title", state.doc.title));
  const meta = [state.doc.ata_chapter, state.doc.applicability].filter(Boolean).join(" · ");
  if (meta) {
    pane.appendChild(el("div", "doc-meta", meta));
  }
  const answer = selectedAnswer(state);
  if (answer !== null && answer.char_span === null) {
    pane.appendChild(
      el("div", "banner", "No extractable answer in this document; showing it unhighlighted."),
    );
  }
  const body = el("pre", "doc-body");
  const segments = splitForHighlight(state.doc.body, state.highlight);
  body.appendChild(document.createTextNode(segments.before));
  if (segments.mark) {
    body.appendChild(el("mark", "highlight", segments.mark));
  }
  body.appendChild(document.createTextNode(segments.after));
  pane.appendChild(body);
  const mark = body.querySelector("mark");
  if (mark) {
    mark.scrollIntoView({ block: "center" });
  }
}

export function render(state: UiState, panes: Panes, handlers: Handlers): void {
  renderChat(state, panes.chat, handlers);
  renderResults(state, panes.results, handlers);
  renderDoc(state, panes.doc);
}
