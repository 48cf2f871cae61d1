import { describe, expect, it } from "vitest";

import { renderStructureStatus, renderTranscript, renderTurn } from "../src/render.js";
import { attachStructure, newSession } from "../src/session.js";
import type { Session, Turn } from "../src/types.js";

function el(): HTMLElement {
  return document.createElement("div");
}

describe("rendering is pass-through", () => {
  it("shows the server's residue count verbatim, computing nothing", () => {
    const target = el();
    // deliberately inconsistent with the text: the UI must echo the field
    const s = attachStructure(newSession(), "toy.pdb", "ATOM (3 lines)", 987);
    renderStructureStatus(target, s);
    expect(target.textContent).toContain("987 residues");
  });

  it("renders answers and server errors verbatim", () => {
    const answered: Turn = {
      id: 1,
      question: "q",
      answer: "Position 4 is glycine (G).",
      timestamp: "t",
    };
    const failed: Turn = { id: 2, question: "q", error: "line 3: bad x field", timestamp: "t" };
    expect(renderTurn(document, answered).querySelector(".answer")!.textContent).toBe(
      "Position 4 is glycine (G).",
    );
    expect(renderTurn(document, failed).querySelector(".error")!.textContent).toBe(
      "line 3: bad x field",
    );
  });

  it("renders timing fields from the response without aggregating them", () => {
    const turn: Turn = {
      id: 3,
      question: "q",
      answer: "a",
      timing: { parse_ms: 1.23, encode_ms: 4.5, adapter_ms: 6.7, generate_ms: 8.9 },
      modelVersion: "protqa/0.1.0",
      timestamp: "t",
    };
    const text = renderTurn(document, turn).querySelector(".timing")!.textContent!;
    for (const piece of ["parse 1.2 ms", "encode 4.5 ms", "adapter 6.7 ms", "generate 8.9 ms"]) {
      expect(text).toContain(piece);
    }
  });

  it("updates a pending turn in place, preserving order", () => {
    const container = el();
    document.body.appendChild(container);
    const s: Session = {
      pdbName: "x",
      pdbText: "y",
      nResidues: 1,
      inFlight: true,
      turns: [
        { id: 10, question: "first", answer: "done", timestamp: "t" },
        { id: 11, question: "second", timestamp: "t" },
      ],
    };
    renderTranscript(container, s);
    expect(container.children).toHaveLength(2);
    expect(container.children[1]!.querySelector(".pending")).not.toBeNull();
    const resolved: Session = {
      ...s,
      turns: [s.turns[0]!, { ...s.turns[1]!, answer: "late answer" }],
    };
    renderTranscript(container, resolved);
    expect(container.children).toHaveLength(2);
    expect(container.children[0]!.querySelector(".answer")!.textContent).toBe("done");
    expect(container.children[1]!.querySelector(".answer")!.textContent).toBe("late answer");
  });
});
