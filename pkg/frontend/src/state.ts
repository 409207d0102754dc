import { ApiClient, ApiError } from "./api";
import {
  ChatMessage,
  ChatSettings,
  DEFAULT_SETTINGS,
} from "./types";

const SETTINGS_KEY = "agrirag-chat-settings";

export function canSend(text: string, pending: boolean): boolean {
  return !pending && text.trim().length > 0;
}

export function loadSettings(storage: Storage): ChatSettings {
  try {
    const raw = storage.getItem(SETTINGS_KEY);
    if (!raw) return { ...DEFAULT_SETTINGS };
    const parsed = JSON.parse(raw);
    return {
      topK: Number(parsed.topK) || DEFAULT_SETTINGS.topK,
      threshold:
        typeof parsed.threshold === "number"
          ? parsed.threshold
          : DEFAULT_SETTINGS.threshold,
    };
  } catch {
    return { ...DEFAULT_SETTINGS };
  }
}

export function saveSettings(storage: Storage, settings: ChatSettings): void {
  storage.setItem(SETTINGS_KEY, JSON.stringify(settings));
}

/**
 * Client-side chat history plus the single-request-in-flight rule.
 * Assistant messages mirror the server payload verbatim; user messages
 * are frozen once appended.
 */
export class ChatStore {
  readonly messages: ChatMessage[] = [];
  pending = false;
  settings: ChatSettings;
  onChange: () => void = () => {};

  constructor(
    private readonly api: ApiClient,
    settings?: ChatSettings,
  ) {
    this.settings = settings ?? { ...DEFAULT_SETTINGS };
  }

  async sendQuery(rawText: string): Promise<void> {
    const text = rawText.trim();
    if (!canSend(rawText, this.pending)) return;
    this.pending = true;
    this.messages.push({ role: "user", text });
    this.onChange();
    try {
      const response = await this.api.chat(text, this.settings);
      this.messages.push({
        role: "assistant",
        text: response.answer,
        citations: response.citations,
        used_fallback: response.used_fallback,
        latency_ms: response.latency_ms,
      });
    } catch (err) {
      const apiErr =
        err instanceof ApiError
          ? err
          : new ApiError(String(err), "server", true);
      this.messages.push({
        role: "assistant",
        text: apiErr.message,
        error: {
          kind: apiErr.kind,
          message: apiErr.message,
          retryable: apiErr.retryable,
        },
      });
    } finally {
      this.pending = false;
      this.onChange();
    }
  }

  adjustSettings(topK: number, threshold: number, storage?: Storage): void {
    this.settings = { topK, threshold };
    if (storage) saveSettings(storage, this.settings);
  }
}
