// Drives the client modules against a real gateway process serving the
// fixture corpus. Requires the Python package to be installed (`opsqa` on
// PATH); everything is built into a temp directory.

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, GatewayClient } from "../src/api.js";
import {
  initialState,
  selectedAnswer,
  withDocument,
  withReply,
  withSelection,
  type UiState,
} from "../src/state.js";

const PORT = 8719;
const QUESTION = "What is the alternate gear extension?";
const FIXTURES = resolve(__dirname, "../../fixtures");

let workdir: string;
let server: ChildProcess;
let serverLog = "";
const client = new GatewayClient(`http://127.0.0.1:${PORT}`);

async function waitForGateway(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    try {
      await client.createSession();
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 200));
    }
  }
  throw new Error(`gateway did not come up on :${PORT}\n${serverLog}`);
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "opsqa-ui-"));
  execFileSync("opsqa", [
    "ingest",
    "--input",
    join(FIXTURES, "manuals"),
    "--out",
    join(workdir, "corpus.jsonl"),
  ]);
  execFileSync("opsqa", [
    "index",
    "--corpus",
    join(workdir, "corpus.jsonl"),
    "--out",
    join(workdir, "index.json"),
  ]);
  writeFileSync(join(workdir, "service.conf"), "index = index.json\n");
  server = spawn("opsqa", ["serve", "--config", join(workdir, "service.conf"), "--port", `${PORT}`]);
  server.stderr?.on("data", (chunk) => (serverLog += chunk));
  server.stdout?.on("data", (chunk) => (serverLog += chunk));
  await waitForGateway();
});

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

describe("conversation flow against a live gateway", () => {
  let state: UiState;

  it("creates a session and answers a question with a ranked list", async () => {
    state = initialState(await client.createSession());
    expect(state.sessionId).toMatch(/^[0-9a-f]{32}$/);

    const reply = await client.sendMessage(state.sessionId, QUESTION);
    expect(reply.intent).toBe("question");
    expect(reply.action).toBe("answer_question");
    expect(reply.selected_rank).toBe(1);
    expect(reply.answers.length).toBeGreaterThanOrEqual(3);
    expect(reply.answers.map((a) => a.rank)).toEqual(
      reply.answers.map((_, i) => i + 1),
    );

    state = withReply(state, reply);
    // Displayed order is exactly API order.
    expect(state.answers).toEqual(reply.answers);
    expect(state.selectedIndex).toBe(0);
    expect(selectedAnswer(state)?.doc_id).toBe("abn-hydraulic");
  });

  it("loads the top document and highlights the answer through its offsets", async () => {
    const answer = selectedAnswer(state)!;
    const doc = await client.getDoc(answer.doc_id);
    expect(doc.offset_map.length).toBe(doc.norm_body.length);

    // The span indexes norm_body exactly; no client-side re-search happens.
    const [start, end] = answer.char_span!;
    expect(doc.norm_body.slice(start, end)).toBe(answer.answer_text);

    state = withDocument(state, doc);
    expect(state.highlight).not.toBeNull();
    expect(state.highlight!.start).toBeGreaterThanOrEqual(0);
    expect(state.highlight!.end).toBeLessThanOrEqual(doc.body.length);
    expect(doc.body.slice(state.highlight!.start, state.highlight!.end).length).toBeGreaterThan(0);
  });

  it("advances to the rank-2 answer on negative feedback and re-highlights", async () => {
    const before = state.answers;
    const reply = await client.sendMessage(state.sessionId, "no");
    expect(reply.intent).toBe("negative_feedback");
    expect(reply.action).toBe("next_ranked_answer");
    expect(reply.selected_rank).toBe(2);
    expect(reply.answers.map((a) => a.doc_id)).toEqual(before.map((a) => a.doc_id));

    state = withReply(state, reply);
    expect(state.selectedIndex).toBe(1);
    const second = selectedAnswer(state)!;
    const doc = await client.getDoc(second.doc_id);
    state = withDocument(state, doc);
    if (second.char_span !== null) {
      const [start, end] = second.char_span;
      expect(doc.norm_body.slice(start, end)).toBe(second.answer_text);
      expect(state.highlight!.end).toBeLessThanOrEqual(doc.body.length);
    } else {
      expect(state.highlight).toBeNull();
    }
  });

  it("keeps panes unchanged on positive feedback", async () => {
    const reply = await client.sendMessage(state.sessionId, "thanks, that helps");
    expect(reply.selected_rank).toBeNull();
    const after = withReply(state, reply);
    expect(after.answers).toBe(state.answers);
    expect(after.selectedIndex).toBe(state.selectedIndex);
    expect(after.transcript.at(-1)?.text).toBe(reply.reply);
    state = after;
  });

  it("shows the apology verbatim when feedback runs off the end of the list", async () => {
    let reply = await client.sendMessage(state.sessionId, "no"); // resume the walk at rank 3
    for (let i = 0; i < 40 && reply.action === "next_ranked_answer"; i++) {
      state = withReply(state, reply);
      reply = await client.sendMessage(state.sessionId, "no");
    }
    expect(reply.action).toBe("apologize_no_more");
    expect(reply.selected_rank).toBeNull();
    const after = withReply(state, reply);
    expect(after.selectedIndex).toBe(state.selectedIndex);
    expect(after.transcript.at(-1)?.text).toBe(reply.reply);
  });

  it("selecting another result needs no message round trip", () => {
    const moved = withSelection(state, 2);
    expect(selectedAnswer(moved)?.rank).toBe(3);
    expect(moved.answers).toBe(state.answers);
  });

  it("surfaces unknown documents as typed 404 errors", async () => {
    const error = await client.getDoc("not-a-doc").catch((e) => e);
    expect(error).toBeInstanceOf(ApiError);
    expect(error.status).toBe(404);
    expect(error.code).toBe("not_found");
  });

  it("surfaces invalid payloads as typed 422 errors", async () => {
    const raw = await fetch(`http://127.0.0.1:${PORT}/api/sessions/${state.sessionId}/messages`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ wrong: true }),
    });
    expect(raw.status).toBe(422);
    const body = await raw.json();
    expect(body.code).toBe("invalid_request");
  });
});
