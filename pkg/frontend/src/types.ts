export interface Citation {
  chunk_id: string;
  doc_title: string;
  section_path: string[];
  score: number;
}

export interface ChatResponse {
  answer: string;
  citations: Citation[];
  used_fallback: boolean;
  provider_id?: string;
  latency_ms: number;
  retrieved_k?: number;
}

export interface ChatMessage {
  role: "user" | "assistant";
  text: string;
  citations?: Citation[];
  used_fallback?: boolean;
  latency_ms?: number;
  error?: ChatError;
}

export interface ChatError {
  kind: "validation" | "server";
  message: string;
  retryable: boolean;
}

export interface HealthStatus {
  status: string;
  index_loaded: boolean;
  providers: { id: string; reachable: boolean }[];
}

export interface ChatSettings {
  topK: number;
  threshold: number;
}

export const DEFAULT_SETTINGS: ChatSettings = { topK: 5, threshold: 0.25 };
