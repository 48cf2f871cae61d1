import type { ChatRequest, ChatResponse, ConfigResponse, HealthResponse } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function readError(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { detail?: string };
    return body.detail ?? `HTTP ${resp.status}`;
  } catch {
    return `HTTP ${resp.status}`;
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!resp.ok) throw Object.assign(new Error(await readError(resp)), { status: resp.status });
    return (await resp.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.get<HealthResponse>("/api/health");
  }

  config(): Promise<ConfigResponse> {
    return this.get<ConfigResponse>("/api/config");
  }

  async chat(req: ChatRequest): Promise<ChatResponse> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/chat`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
    if (!resp.ok) throw Object.assign(new Error(await readError(resp)), { status: resp.status });
    return (await resp.json()) as ChatResponse;
  }

  /** Dry-run chat (max_new = 0): validates parseability server-side and
   *  returns the residue count without generating anything. */
  validateStructure(pdb: string): Promise<ChatResponse> {
    return this.chat({ pdb, question: "validate", max_new: 0 });
  }
}
