import { ApiClient } from "./api.js";
import { renderStructureStatus, renderTranscript } from "./render.js";
import {
  attachStructure,
  beginTurn,
  canSend,
  failTurn,
  newSession,
  questionWithHistory,
  resolveTurn,
} from "./session.js";
import type { Session } from "./types.js";
import { checkUpload } from "./validation.js";

function required<T extends HTMLElement>(doc: Document, id: string): T {
  const el = doc.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

export function initApp(doc: Document, baseUrl?: string): void {
  const endpointInput = required<HTMLInputElement>(doc, "endpoint");
  endpointInput.value = baseUrl ?? endpointInput.value ?? "";
  const upload = required<HTMLInputElement>(doc, "upload");
  const structureStatus = required<HTMLElement>(doc, "structure-status");
  const transcript = required<HTMLElement>(doc, "transcript");
  const form = required<HTMLFormElement>(doc, "ask-form");
  const questionInput = required<HTMLInputElement>(doc, "question");
  const sendButton = required<HTMLButtonElement>(doc, "send");
  const historyToggle = required<HTMLInputElement>(doc, "history");
  const statusLine = required<HTMLElement>(doc, "status");

  let session: Session = newSession();
  const client = () => new ApiClient(endpointInput.value.replace(/\/$/, ""));

  function paint(): void {
    renderStructureStatus(structureStatus, session);
    renderTranscript(transcript, session);
    sendButton.disabled = !canSend(session, questionInput.value);
  }

  client()
    .health()
    .then((h) => {
      statusLine.textContent = `connected: ${h.model_version} (${h.config_hash})`;
    })
    .catch(() => {
      statusLine.textContent = "service unreachable";
    });

  upload.addEventListener("change", async () => {
    const file = upload.files?.[0];
    if (!file) return;
    const check = checkUpload(file.name, file.size);
    if (!check.ok) {
      structureStatus.textContent = `rejected: ${check.reason}`;
      return;
    }
    const text = await file.text();
    statusLine.textContent = "validating structure…";
    try {
      const resp = await client().validateStructure(text);
      session = attachStructure(session, file.name, text, resp.n_residues);
      statusLine.textContent = "structure accepted";
    } catch (e) {
      const err = e as Error & { status?: number };
      structureStatus.textContent = `server rejected structure: ${err.message}`;
      statusLine.textContent = "upload failed";
      return;
    }
    paint();
  });

  questionInput.addEventListener("input", () => {
    sendButton.disabled = !canSend(session, questionInput.value);
  });

  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const question = questionInput.value.trim();
    const pdbText = session.pdbText;
    if (!canSend(session, question) || pdbText === null) return;
    const sent = beginTurn(session, question);
    session = sent.session;
    questionInput.value = "";
    paint();
    try {
      const resp = await client().chat({
        pdb: pdbText,
        question: questionWithHistory(session, question, historyToggle.checked),
      });
      session = resolveTurn(session, sent.turnId, resp);
    } catch (e) {
      const err = e as Error & { status?: number };
      session = failTurn(session, sent.turnId, err.message);
    }
    paint();
    questionInput.focus();
  });

  paint();
}
