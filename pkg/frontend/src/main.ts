// Application wiring: session lifecycle, network effects, event handlers.
// One message is in flight at a time; state transitions are pure and the UI
// re-renders after each.

import { ApiError, GatewayClient, type DocRecord } from "./api.js";
import {
  initialState,
  moveSelection,
  selectedAnswer,
  withDocument,
  withFailure,
  withReply,
  withSelection,
  withUserMessage,
  type UiState,
} from "./state.js";
import { render, type Panes } from "./ui.js";

const SESSION_KEY = "opsqa_session_id";

function apiBase(): string {
  const override = new URLSearchParams(window.location.search).get("api");
  return override ?? "http://127.0.0.1:8080";
}

class App {
  private state: UiState;
  private readonly docCache = new Map<string, DocRecord>();

  constructor(
    private readonly client: GatewayClient,
    private readonly panes: Panes,
    private readonly input: HTMLInputElement,
    private readonly sendButton: HTMLButtonElement,
    private readonly feedback: { yes: HTMLButtonElement; no: HTMLButtonElement },
    sessionId: string,
  ) {
    this.state = initialState(sessionId);
  }

  static async boot(): Promise<App> {
    const client = new GatewayClient(apiBase());
    let sessionId = localStorage.getItem(SESSION_KEY);
    if (sessionId === null) {
      sessionId = await client.createSession();
      localStorage.setItem(SESSION_KEY, sessionId);
    }
    const panes: Panes = {
      chat: document.getElementById("chat")!,
      results: document.getElementById("results")!,
      doc: document.getElementById("document")!,
    };
    const app = new App(
      client,
      panes,
      document.getElementById("input") as HTMLInputElement,
      document.getElementById("send") as HTMLButtonElement,
      {
        yes: document.getElementById("feedback-yes") as HTMLButtonElement,
        no: document.getElementById("feedback-no") as HTMLButtonElement,
      },
      sessionId,
    );
    app.wire();
    app.redraw();
    return app;
  }

  private wire(): void {
    this.sendButton.addEventListener("click", () => this.submit());
    this.input.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        this.submit();
      }
    });
    this.input.addEventListener("input", () => this.syncControls());
    this.feedback.yes.addEventListener("click", () => void this.send("yes"));
    this.feedback.no.addEventListener("click", () => void this.send("no"));
    document.addEventListener("keydown", (event) => {
      if (event.target === this.input) {
        return;
      }
      if (event.key === "ArrowDown" || event.key === "ArrowUp") {
        event.preventDefault();
        this.apply(moveSelection(this.state, event.key === "ArrowDown" ? 1 : -1));
        void this.loadSelectedDoc();
      }
    });
  }

  private submit(): void {
    const text = this.input.value.trim();
    if (text === "" || this.state.busy) {
      return;
    }
    this.input.value = "";
    void this.send(text);
  }

  private async send(text: string): Promise<void> {
    if (this.state.busy) {
      return;
    }
    this.apply(withUserMessage(this.state, text));
    try {
      const reply = await this.trySend(text);
      this.apply(withReply(this.state, reply));
      await this.loadSelectedDoc();
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      this.apply(withFailure(this.state, text, `Request failed: ${message}`));
    }
  }

  // A stored session can outlive a server restart; recreate it once on 404.
  private async trySend(text: string) {
    try {
      return await this.client.sendMessage(this.state.sessionId, text);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        const sessionId = await this.client.createSession();
        localStorage.setItem(SESSION_KEY, sessionId);
        this.state = { ...this.state, sessionId };
        return await this.client.sendMessage(sessionId, text);
      }
      throw error;
    }
  }

  private onSelect(index: number): void {
    this.apply(withSelection(this.state, index));
    void this.loadSelectedDoc();
  }

  private async loadSelectedDoc(): Promise<void> {
    const answer = selectedAnswer(this.state);
    if (answer === null) {
      return;
    }
    if (this.state.doc?.doc_id === answer.doc_id) {
      this.apply(withDocument(this.state, this.state.doc));
      return;
    }
    let doc = this.docCache.get(answer.doc_id);
    if (doc === undefined) {
      doc = await this.client.getDoc(answer.doc_id);
      this.docCache.set(answer.doc_id, doc);
    }
    this.apply(withDocument(this.state, doc));
  }

  private apply(next: UiState): void {
    this.state = next;
    this.redraw();
  }

  private redraw(): void {
    render(this.state, this.panes, {
      onSelect: (index) => this.onSelect(index),
      onRetry: (text) => void this.send(text),
    });
    this.syncControls();
  }

  private syncControls(): void {
    this.sendButton.disabled = this.state.busy || this.input.value.trim() === "";
    const haveAnswer = selectedAnswer(this.state) !== null;
    this.feedback.yes.disabled = this.state.busy || !haveAnswer;
    this.feedback.no.disabled = this.state.busy || !haveAnswer;
  }
}

document.addEventListener("DOMContentLoaded", () => {
  void App.boot();
});
