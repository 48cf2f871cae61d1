// DOM rendering. Every number shown here comes from a server response field;
// this layer formats, it never computes.

import type { Session, Turn } from "./types.js";

export function renderStructureStatus(el: HTMLElement, s: Session): void {
  if (s.pdbName === null) {
    el.textContent = "No structure loaded.";
    return;
  }
  // n_residues is the server's count, echoed verbatim
  el.textContent = `${s.pdbName}: ${s.nResidues} residues (server-parsed).`;
}

export function turnElementId(turnId: number): string {
  return `turn-${turnId}`;
}

export function renderTurn(doc: Document, turn: Turn): HTMLElement {
  const div = doc.createElement("div");
  div.id = turnElementId(turn.id);
  div.className = "turn";

  const q = doc.createElement("div");
  q.className = "question";
  q.textContent = turn.question;
  div.appendChild(q);

  const a = doc.createElement("div");
  if (turn.error !== undefined) {
    a.className = "error";
    a.textContent = turn.error;
  } else if (turn.answer !== undefined) {
    a.className = "answer";
    a.textContent = turn.answer;
  } else {
    a.className = "pending";
    a.textContent = "…";
  }
  div.appendChild(a);

  if (turn.timing) {
    const t = doc.createElement("div");
    t.className = "timing";
    const ms = turn.timing;
    t.textContent =
      `parse ${ms.parse_ms.toFixed(1)} ms · encode ${ms.encode_ms.toFixed(1)} ms · ` +
      `adapter ${ms.adapter_ms.toFixed(1)} ms · generate ${ms.generate_ms.toFixed(1)} ms · ` +
      `${turn.modelVersion ?? ""}`;
    div.appendChild(t);
  }
  return div;
}

export function renderTranscript(container: HTMLElement, s: Session): void {
  const doc = container.ownerDocument;
  for (const turn of s.turns) {
    const existing = doc.getElementById(turnElementId(turn.id));
    const fresh = renderTurn(doc, turn);
    if (existing) {
      existing.replaceWith(fresh);
    } else {
      container.appendChild(fresh); // append order == send order
    }
  }
}
