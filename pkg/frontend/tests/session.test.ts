import { describe, expect, it } from "vitest";

import {
  attachStructure,
  beginTurn,
  canSend,
  failTurn,
  newSession,
  questionWithHistory,
  resolveTurn,
} from "../src/session.js";
import type { ChatResponse } from "../src/types.js";

const RESP: ChatResponse = {
  answer: "Yes, they are in contact.",
  timing: { parse_ms: 1, encode_ms: 2, adapter_ms: 3, generate_ms: 4 },
  model_version: "protqa/0.1.0",
  config_hash: "abc",
  n_residues: 12,
};

function loaded() {
  return attachStructure(newSession(), "toy.pdb", "ATOM ...", 12);
}

describe("session state", () => {
  it("cannot send without a structure or with empty text", () => {
    expect(canSend(newSession(), "hi")).toBe(false);
    expect(canSend(loaded(), "   ")).toBe(false);
    expect(canSend(loaded(), "hi")).toBe(true);
  });

  it("blocks a second in-flight request", () => {
    const { session } = beginTurn(loaded(), "q1");
    expect(session.inFlight).toBe(true);
    expect(canSend(session, "q2")).toBe(false);
  });

  it("keeps transcript in send order even when responses resolve out of order", () => {
    let s = loaded();
    const first = beginTurn(s, "first");
    s = { ...first.session, inFlight: false }; // simulate a second sender slot
    const second = beginTurn(s, "second");
    s = second.session;
    // second response arrives before the first
    s = resolveTurn(s, second.turnId, { ...RESP, answer: "answer two" });
    s = resolveTurn(s, first.turnId, { ...RESP, answer: "answer one" });
    expect(s.turns.map((t) => t.question)).toEqual(["first", "second"]);
    expect(s.turns.map((t) => t.answer)).toEqual(["answer one", "answer two"]);
  });

  it("a turn holds an answer or an error, never both", () => {
    let s = loaded();
    const a = beginTurn(s, "qa");
    s = resolveTurn(a.session, a.turnId, RESP);
    const b = beginTurn(s, "qb");
    s = failTurn(b.session, b.turnId, "HTTP 503");
    const [ta, tb] = s.turns;
    expect(ta!.answer).toBeDefined();
    expect(ta!.error).toBeUndefined();
    expect(tb!.error).toBe("HTTP 503");
    expect(tb!.answer).toBeUndefined();
  });

  it("uploading a new structure clears the transcript", () => {
    let s = loaded();
    const t = beginTurn(s, "q");
    s = resolveTurn(t.session, t.turnId, RESP);
    s = attachStructure(s, "other.pdb", "ATOM ...", 30);
    expect(s.turns).toEqual([]);
    expect(s.nResidues).toBe(30);
  });

  it("embeds prior answered turns in the documented history template", () => {
    let s = loaded();
    const t = beginTurn(s, "How many residues?");
    s = resolveTurn(t.session, t.turnId, { ...RESP, answer: "This protein has 12 residues." });
    expect(questionWithHistory(s, "And is it helical?", true)).toBe(
      "Q: How many residues?\nA: This protein has 12 residues.\nQ: And is it helical?",
    );
    expect(questionWithHistory(s, "And is it helical?", false)).toBe("And is it helical?");
  });
});
