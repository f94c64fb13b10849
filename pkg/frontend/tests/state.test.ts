import { describe, expect, it } from "vitest";

import type { Answer, DocRecord, MessageReply } from "../src/api.js";
import {
  barWidths,
  initialState,
  moveSelection,
  selectedAnswer,
  withDocument,
  withFailure,
  withReply,
  withSelection,
  withUserMessage,
} from "../src/state.js";

function answer(rank: number, combined: number, overrides: Partial<Answer> = {}): Answer {
  return {
    doc_id: `doc-${rank}`,
    answer_text: `answer ${rank}`,
    char_span: [0, 7],
    tag: "SPAN",
    tag_score: 0.9,
    retriever_score: 5 - rank,
    qa_score: 0.5,
    combined_score: combined,
    rank,
    ...overrides,
  };
}

function reply(selectedRank: number | null, answers: Answer[], text = "here"): MessageReply {
  return {
    intent: "question",
    action: selectedRank === null ? "utter" : "answer_question",
    reply: text,
    selected_rank: selectedRank,
    answers,
  };
}

// body "LDG max" where "landing" replaced "LDG"; replacement chars map to the
// start of their source region.
const DOC: DocRecord = {
  doc_id: "doc-1",
  ata_chapter: "32-30",
  applicability: "all",
  title: "Sample",
  headers: "",
  body: "LDG max",
  norm_body: "landing max",
  offset_map: [0, 0, 0, 0, 0, 0, 0, 3, 4, 5, 6],
};

describe("transcript transitions", () => {
  it("appends the user turn and marks a message in flight", () => {
    const state = withUserMessage(initialState("s"), "hi there");
    expect(state.transcript).toEqual([{ role: "user", text: "hi there" }]);
    expect(state.busy).toBe(true);
  });

  it("records failures as retryable error bubbles without losing the transcript", () => {
    let state = withUserMessage(initialState("s"), "query");
    state = withFailure(state, "query", "network down");
    expect(state.transcript.map((b) => b.role)).toEqual(["user", "error"]);
    expect(state.pendingText).toBe("query");
    expect(state.busy).toBe(false);
  });
});

describe("reply handling", () => {
  it("adopts the answer list in API order and selects the server's rank", () => {
    const answers = [answer(1, 3.0), answer(2, 2.0), answer(3, 1.0)];
    const state = withReply(initialState("s"), reply(1, answers));
    expect(state.answers).toEqual(answers);
    expect(state.selectedIndex).toBe(0);
    expect(selectedAnswer(state)?.rank).toBe(1);
    expect(state.transcript.at(-1)).toEqual({ role: "system", text: "here" });
  });

  it("tracks a feedback reply that advances the selection", () => {
    const answers = [answer(1, 3.0), answer(2, 2.0)];
    let state = withReply(initialState("s"), reply(1, answers));
    state = withReply(state, reply(2, answers, "next one"));
    expect(state.selectedIndex).toBe(1);
    expect(state.answers).toEqual(answers);
  });

  it("leaves panes untouched on utter-only replies", () => {
    const answers = [answer(1, 3.0), answer(2, 2.0)];
    let state = withReply(initialState("s"), reply(1, answers));
    state = withSelection(state, 1);
    const after = withReply(state, reply(null, answers, "you're welcome"));
    expect(after.answers).toBe(state.answers);
    expect(after.selectedIndex).toBe(1);
    expect(after.transcript.at(-1)?.text).toBe("you're welcome");
  });

  it("rejects a selected rank that is not in the list", () => {
    expect(() => withReply(initialState("s"), reply(5, [answer(1, 1.0)]))).toThrow(
      /selected_rank 5/,
    );
  });
});

describe("selection", () => {
  const answers = [answer(1, 3.0), answer(2, 2.0), answer(3, 1.0)];

  it("clamps clicks and keyboard moves to the answer bounds", () => {
    let state = withReply(initialState("s"), reply(1, answers));
    expect(withSelection(state, 99).selectedIndex).toBe(2);
    expect(withSelection(state, -5).selectedIndex).toBe(0);
    state = moveSelection(state, -1);
    expect(state.selectedIndex).toBe(0);
    state = moveSelection(moveSelection(moveSelection(state, 1), 1), 1);
    expect(state.selectedIndex).toBe(2);
  });

  it("is inert without answers", () => {
    const state = initialState("s");
    expect(withSelection(state, 1)).toBe(state);
    expect(moveSelection(state, 1)).toBe(state);
    expect(selectedAnswer(state)).toBeNull();
  });
});

describe("document loading", () => {
  it("derives the display highlight from the answer span through the offset map", () => {
    const answers = [answer(1, 3.0, { char_span: [8, 11] })]; // "max" in norm_body
    let state = withReply(initialState("s"), reply(1, answers));
    state = withDocument(state, DOC);
    expect(state.highlight).toEqual({ start: 4, end: 7 });
    expect(DOC.body.slice(4, 7)).toBe("max");
  });

  it("maps a span over replaced text back to the whole source region", () => {
    const answers = [answer(1, 3.0, { char_span: [0, 7] })]; // "landing"
    const state = withDocument(withReply(initialState("s"), reply(1, answers)), DOC);
    expect(state.highlight).toEqual({ start: 0, end: 3 });
    expect(DOC.body.slice(0, 3)).toBe("LDG");
  });

  it("shows no highlight for a no-answer result", () => {
    const answers = [answer(1, 3.0, { char_span: null, answer_text: null, tag: "NO_SPAN" })];
    const state = withDocument(withReply(initialState("s"), reply(1, answers)), DOC);
    expect(state.doc).toBe(DOC);
    expect(state.highlight).toBeNull();
  });

  it("ignores spans when the loaded doc is not the selected answer's", () => {
    const answers = [answer(1, 3.0, { doc_id: "other" })];
    const state = withDocument(withReply(initialState("s"), reply(1, answers)), DOC);
    expect(state.highlight).toBeNull();
  });

  it("keeps the highlight inside the document body", () => {
    const answers = [answer(1, 3.0, { char_span: [0, DOC.norm_body.length] })];
    const state = withDocument(withReply(initialState("s"), reply(1, answers)), DOC);
    expect(state.highlight!.start).toBeGreaterThanOrEqual(0);
    expect(state.highlight!.end).toBeLessThanOrEqual(DOC.body.length);
  });
});

describe("score bars", () => {
  it("is monotone with combined_score and spans the visible range", () => {
    const widths = barWidths([answer(1, 4.7), answer(2, 1.2), answer(3, -0.3)]);
    expect(widths[0]).toBe(100);
    expect(widths[2]).toBe(8);
    expect(widths[0]! > widths[1]! && widths[1]! > widths[2]!).toBe(true);
  });

  it("handles equal scores and empty lists", () => {
    expect(barWidths([answer(1, 2.0), answer(2, 2.0)])).toEqual([100, 100]);
    expect(barWidths([])).toEqual([]);
  });

  it("never reorders: widths follow the list order, not score order", () => {
    const answers = [answer(1, 1.0), answer(2, 3.0)]; // server order is authoritative
    const widths = barWidths(answers);
    expect(widths[1]! > widths[0]!).toBe(true);
  });
});
