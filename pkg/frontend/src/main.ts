import { ApiClient } from "./api";
import { canSend, ChatStore, loadSettings } from "./state";
import { renderHealth, renderMessages } from "./view";

const API_BASE =
  new URLSearchParams(window.location.search).get("api") ??
  "http://127.0.0.1:8080";

const HEALTH_POLL_MS = 10_000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const api = new ApiClient(API_BASE);
  const store = new ChatStore(api, loadSettings(window.localStorage));

  const log = el<HTMLDivElement>("chat-log");
  const input = el<HTMLTextAreaElement>("chat-input");
  const sendButton = el<HTMLButtonElement>("send-button");
  const topKInput = el<HTMLInputElement>("setting-top-k");
  const thresholdInput = el<HTMLInputElement>("setting-threshold");
  const healthBox = el<HTMLDivElement>("health-status");

  topKInput.value = String(store.settings.topK);
  thresholdInput.value = String(store.settings.threshold);

  const refreshSendState = () => {
    sendButton.disabled = !canSend(input.value, store.pending);
  };

  store.onChange = () => {
    renderMessages(log, store.messages);
    log.scrollTop = log.scrollHeight;
    refreshSendState();
  };

  const submit = async () => {
    const text = input.value;
    if (!canSend(text, store.pending)) return;
    input.value = "";
    refreshSendState();
    await store.sendQuery(text);
  };

  sendButton.addEventListener("click", submit);
  input.addEventListener("input", refreshSendState);
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && !event.shiftKey) {
      event.preventDefault();
      void submit();
    }
  });

  const applySettings = () => {
    store.adjustSettings(
      Math.max(1, Number(topKInput.value) || store.settings.topK),
      Number(thresholdInput.value),
      window.localStorage,
    );
  };
  topKInput.addEventListener("change", applySettings);
  thresholdInput.addEventListener("change", applySettings);

  const pollHealth = async () => {
    try {
      renderHealth(healthBox, await api.health());
    } catch {
      renderHealth(healthBox, null);
    }
  };
  void pollHealth();
  window.setInterval(pollHealth, HEALTH_POLL_MS);
  refreshSendState();
}

main();
