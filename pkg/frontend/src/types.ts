// API contract mirrored from the inference service. The contract test checks
// these shapes against a live /api/config + /api/chat when a server is up.

export interface ChatRequest {
  pdb: string;
  question: string;
  max_new?: number;
  mode?: "greedy" | "temperature";
  temperature?: number;
  seed?: number;
}

export interface ChatTiming {
  parse_ms: number;
  encode_ms: number;
  adapter_ms: number;
  generate_ms: number;
}

export interface ChatResponse {
  answer: string;
  timing: ChatTiming;
  model_version: string;
  config_hash: string;
  n_residues: number;
}

export interface HealthResponse {
  status: string;
  model_version: string;
  config_hash: string;
}

export interface ConfigResponse {
  model_version: string;
  config_hash: string;
  config: {
    encoder: Record<string, unknown>;
    adapter: Record<string, unknown>;
    lm: Record<string, unknown>;
    lora: Record<string, unknown> | null;
    template_version: string;
  };
  limits: {
    max_pdb_bytes: number;
    max_context: number;
    max_new_cap: number;
  };
}

export interface ApiError {
  status: number;
  detail: string;
}

export interface Turn {
  id: number; // correlation id; DOM updates target the turn, not the tail
  question: string;
  answer?: string;
  error?: string;
  timing?: ChatTiming;
  modelVersion?: string;
  timestamp: string;
}

export interface Session {
  pdbName: string | null;
  pdbText: string | null;
  nResidues: number | null;
  turns: Turn[];
  inFlight: boolean;
}
