// Pure view state and its transitions. Rendering and network effects live
// elsewhere; everything here is synchronous and immutable so it can be
// tested without a DOM.

import type { Answer, DocRecord, MessageReply } from "./api.js";
import type { DisplaySpan } from "./highlight.js";
import { toDisplaySpan } from "./highlight.js";

export interface ChatBubble {
  readonly role: "user" | "system" | "error";
  readonly text: string;
}

export interface UiState {
  readonly sessionId: string;
  readonly transcript: readonly ChatBubble[];
  readonly answers: readonly Answer[];
  readonly selectedIndex: number | null;
  readonly doc: DocRecord | null;
  readonly highlight: DisplaySpan | null;
  readonly busy: boolean;
  readonly pendingText: string | null;
}

export function initialState(sessionId: string): UiState {
  return {
    sessionId,
    transcript: [],
    answers: [],
    selectedIndex: null,
    doc: null,
    highlight: null,
    busy: false,
    pendingText: null,
  };
}

export function withUserMessage(state: UiState, text: string): UiState {
  return {
    ...state,
    transcript: [...state.transcript, { role: "user", text }],
    busy: true,
    pendingText: null,
  };
}

// Applies a gateway reply. A numeric selected_rank means the server is
// presenting an answer: adopt its list (in API order, never re-sorted) and
// selection. A null rank is an utter-only turn; the panes stay as they are.
export function withReply(state: UiState, reply: MessageReply): UiState {
  const next: UiState = {
    ...state,
    transcript: [...state.transcript, { role: "system", text: reply.reply }],
    busy: false,
  };
  if (reply.selected_rank === null) {
    return next;
  }
  const index = reply.answers.findIndex((a) => a.rank === reply.selected_rank);
  if (index < 0) {
    throw new Error(`selected_rank ${reply.selected_rank} not in answers`);
  }
  return { ...next, answers: reply.answers, selectedIndex: index };
}

export function withFailure(state: UiState, text: string, message: string): UiState {
  return {
    ...state,
    transcript: [...state.transcript, { role: "error", text: message }],
    busy: false,
    pendingText: text,
  };
}

export function withSelection(state: UiState, index: number): UiState {
  if (state.answers.length === 0) {
    return state;
  }
  const clamped = Math.min(Math.max(index, 0), state.answers.length - 1);
  return { ...state, selectedIndex: clamped };
}

export function moveSelection(state: UiState, delta: number): UiState {
  if (state.selectedIndex === null) {
    return state;
  }
  return withSelection(state, state.selectedIndex + delta);
}

export function selectedAnswer(state: UiState): Answer | null {
  return state.selectedIndex === null ? null : (state.answers[state.selectedIndex] ?? null);
}

// Attaches the loaded document for the selected answer, deriving the display
// highlight from the answer's norm_body span through the offset map.
export function withDocument(state: UiState, doc: DocRecord): UiState {
  const answer = selectedAnswer(state);
  let highlight: DisplaySpan | null = null;
  if (answer !== null && answer.doc_id === doc.doc_id && answer.char_span !== null) {
    highlight = toDisplaySpan(
      doc.offset_map,
      doc.body.length,
      answer.char_span[0],
      answer.char_span[1],
    );
  }
  return { ...state, doc, highlight };
}

// Bar widths in percent, monotone in combined_score: the best candidate gets
// 100 and the worst a small visible floor, linear in between.
export function barWidths(answers: readonly Answer[]): number[] {
  if (answers.length === 0) {
    return [];
  }
  const scores = answers.map((a) => a.combined_score);
  const max = Math.max(...scores);
  const min = Math.min(...scores);
  if (max === min) {
    return scores.map(() => 100);
  }
  return scores.map((s) => 8 + (92 * (s - min)) / (max - min));
}
