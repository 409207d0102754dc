import type { ChatMessage, Citation, HealthStatus } from "./types";

export function formatCitation(citation: Citation): string {
  const path = [citation.doc_title, ...citation.section_path].join(" / ");
  return `${path} (${citation.score.toFixed(2)})`;
}

/**
 * Build one message bubble. The answer text is inserted via textContent,
 * byte-equal to the payload: no markdown, no trimming, no rewriting.
 */
export function renderMessage(msg: ChatMessage): HTMLElement {
  const root = document.createElement("div");
  root.className = `message message-${msg.role}`;

  const body = document.createElement("div");
  body.className = "message-text";
  body.textContent = msg.text;
  root.appendChild(body);

  if (msg.error) {
    root.classList.add("message-error");
    const note = document.createElement("div");
    note.className =
      msg.error.kind === "validation" ? "error-validation" : "error-retryable";
    note.textContent = msg.error.retryable
      ? "Request failed — you can retry."
      : msg.error.message;
    root.appendChild(note);
    return root;
  }

  if (msg.role === "assistant") {
    if (msg.used_fallback) {
      const badge = document.createElement("span");
      badge.className = "fallback-badge";
      badge.textContent = "no sources — general knowledge";
      root.appendChild(badge);
    }
    const citations = msg.citations ?? [];
    if (citations.length > 0) {
      const list = document.createElement("ul");
      list.className = "citations";
      for (const citation of citations) {
        const row = document.createElement("li");
        row.className = "citation-row";
        row.textContent = formatCitation(citation);
        list.appendChild(row);
      }
      root.appendChild(list);
    }
    if (typeof msg.latency_ms === "number") {
      const meta = document.createElement("div");
      meta.className = "latency";
      meta.textContent = `${(msg.latency_ms / 1000).toFixed(2)} s`;
      root.appendChild(meta);
    }
  }
  return root;
}

export function renderMessages(container: HTMLElement, messages: ChatMessage[]): void {
  container.replaceChildren(...messages.map(renderMessage));
}

export function renderHealth(container: HTMLElement, health: HealthStatus | null): void {
  if (!health) {
    container.textContent = "backend unreachable";
    container.className = "health health-down";
    return;
  }
  const providers = health.providers
    .map((p) => `${p.id}${p.reachable ? "" : " (unreachable)"}`)
    .join(", ");
  container.textContent = `index: ${health.index_loaded ? "loaded" : "none"} · ${providers}`;
  container.className = "health health-up";
}
