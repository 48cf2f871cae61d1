// Pure session-state transitions; the DOM layer only renders what's here.

import type { ChatResponse, Session, Turn } from "./types.js";

let nextTurnId = 1;

export function newSession(): Session {
  return { pdbName: null, pdbText: null, nResidues: null, turns: [], inFlight: false };
}

export function attachStructure(s: Session, name: string, text: string, nResidues: number): Session {
  return { ...s, pdbName: name, pdbText: text, nResidues, turns: [] };
}

export function canSend(s: Session, question: string): boolean {
  return !s.inFlight && s.pdbText !== null && question.trim().length > 0;
}

/** Append a pending turn; returns its correlation id. Turns are append-only
 *  and later resolved by id, so transcript order always matches send order. */
export function beginTurn(s: Session, question: string): { session: Session; turnId: number } {
  const turn: Turn = {
    id: nextTurnId++,
    question,
    timestamp: new Date().toISOString(),
  };
  return {
    session: { ...s, turns: [...s.turns, turn], inFlight: true },
    turnId: turn.id,
  };
}

export function resolveTurn(s: Session, turnId: number, resp: ChatResponse): Session {
  return finishTurn(s, turnId, (t) => ({
    ...t,
    answer: resp.answer,
    timing: resp.timing,
    modelVersion: resp.model_version,
  }));
}

export function failTurn(s: Session, turnId: number, message: string): Session {
  return finishTurn(s, turnId, (t) => ({ ...t, error: message }));
}

function finishTurn(s: Session, turnId: number, update: (t: Turn) => Turn): Session {
  const turns = s.turns.map((t) => (t.id === turnId ? update(t) : t));
  return { ...s, turns, inFlight: false };
}

/** Documented history template: the server is stateless, so prior turns are
 *  embedded in the question field as "Q: ...\nA: ...\n" pairs. */
export function questionWithHistory(s: Session, question: string, includeHistory: boolean): string {
  if (!includeHistory) return question;
  const previous = s.turns
    .filter((t) => t.answer !== undefined)
    .map((t) => `Q: ${t.question}\nA: ${t.answer}`)
    .join("\n");
  return previous ? `${previous}\nQ: ${question}` : question;
}
