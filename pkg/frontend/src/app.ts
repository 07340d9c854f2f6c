/**
 * Single-page wiring for the chat-and-browse client. All state lives on the
 * server; this file only routes DOM events to the API and drops rendered
 * responses into the three panels (catalog, conversation, detail).
 */

import { ApiError, CatalogApi, NetworkFailure, type Source } from "./api.js";
import {
  renderAudit,
  renderCatalog,
  renderComparison,
  renderConversation,
  renderManifest,
  renderMessage,
  renderNotFound,
  renderProfile,
  renderRefineHint,
  renderRetry,
  renderSourceInspector,
  sourceKey,
} from "./render.js";

declare global {
  interface Window {
    ROBODEX_BASE_URL?: string;
  }
}

const api = new CatalogApi(window.ROBODEX_BASE_URL ?? "");

const catalogPane = document.getElementById("catalog") as HTMLElement;
const conversationPane = document.getElementById("conversation") as HTMLElement;
const detailPane = document.getElementById("detail") as HTMLElement;
const input = document.getElementById("query-input") as HTMLInputElement;
const sendButton = document.getElementById("send") as HTMLButtonElement;
const compareButton = document.getElementById("compare-selected") as HTMLButtonElement;
const modeSelect = document.getElementById("mode") as HTMLSelectElement;

let sessionId = "";
const sourcesByKey = new Map<string, Source>();

function rememberSources(sources: Source[]): void {
  for (const source of sources) {
    sourcesByKey.set(sourceKey(source), source);
  }
}

async function refreshConversation(): Promise<void> {
  const log = await api.getSession(sessionId);
  for (const message of log.messages) {
    rememberSources(message.sources);
  }
  conversationPane.innerHTML = renderConversation(log.messages);
  conversationPane.scrollTop = conversationPane.scrollHeight;
}

async function refreshCatalog(): Promise<void> {
  const selected = selectedDois();
  catalogPane.innerHTML = renderCatalog(await api.listDatasets(), selected);
  updateCompareButton();
}

function selectedDois(): string[] {
  return Array.from(catalogPane.querySelectorAll<HTMLInputElement>(".compare-pick:checked")).map(
    (box) => box.value,
  );
}

function updateCompareButton(): void {
  compareButton.disabled = selectedDois().length < 2;
}

function updateSendButton(): void {
  sendButton.disabled = input.value.trim() === "";
}

async function sendQuery(text: string): Promise<void> {
  const optimistic = document.createElement("div");
  optimistic.innerHTML = renderMessage({ role: "user", text, sources: [] });
  conversationPane.appendChild(optimistic);
  conversationPane.scrollTop = conversationPane.scrollHeight;
  try {
    const mode = modeSelect.value === "LLM" ? "LLM" : "Grounded";
    const reply = await api.sendQuery(sessionId, text, mode);
    rememberSources(reply.sources);
    const bubble = document.createElement("div");
    bubble.innerHTML = renderMessage({ role: "system", text: reply.answer, sources: reply.sources });
    conversationPane.appendChild(bubble);
  } catch (error) {
    optimistic.remove(); // the server recorded nothing
    const notice = document.createElement("div");
    if (error instanceof ApiError && error.code === "AmbiguousComparison") {
      const hint = typeof error.details["hint"] === "string" ? (error.details["hint"] as string) : "";
      notice.innerHTML = renderRefineHint(error.message, hint);
    } else if (error instanceof NetworkFailure) {
      notice.innerHTML = renderRetry(text);
    } else {
      notice.innerHTML = renderRefineHint(error instanceof Error ? error.message : String(error), "");
    }
    conversationPane.appendChild(notice);
  }
  conversationPane.scrollTop = conversationPane.scrollHeight;
}

async function openDataset(doi: string): Promise<void> {
  try {
    const profile = await api.getProfile(doi);
    const audit = await api.getAudit(doi);
    detailPane.innerHTML = renderProfile(profile) + renderAudit(audit);
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      detailPane.innerHTML = renderNotFound(doi);
    } else {
      throw error;
    }
  }
}

async function runCompare(): Promise<void> {
  const dois = selectedDois();
  if (dois.length < 2) {
    return;
  }
  detailPane.innerHTML = renderComparison(await api.compare(dois));
}

async function downloadManifest(doi: string): Promise<void> {
  const manifest = await api.getManifest(doi);
  detailPane.innerHTML += renderManifest(manifest);
  const response = await fetch(api.manifestScriptUrl(doi));
  const blob = await response.blob();
  const anchor = document.createElement("a");
  anchor.href = URL.createObjectURL(blob);
  anchor.download = "download.sh";
  anchor.click();
  URL.revokeObjectURL(anchor.href);
}

async function inspectSource(key: string): Promise<void> {
  const source = sourcesByKey.get(key);
  if (!source) {
    return;
  }
  if (source.kind === "fact") {
    detailPane.innerHTML = renderSourceInspector(source);
    return;
  }
  try {
    detailPane.innerHTML = renderSourceInspector(source, await api.getChunk(source.chunk_id));
  } catch {
    detailPane.innerHTML = renderSourceInspector(source);
  }
}

// -- event wiring ---------------------------------------------------------------

input.addEventListener("input", updateSendButton);
input.addEventListener("keydown", (event) => {
  if (event.key === "Enter" && !sendButton.disabled) {
    void submit();
  }
});
sendButton.addEventListener("click", () => void submit());

async function submit(): Promise<void> {
  const text = input.value.trim();
  if (!text) {
    return;
  }
  input.value = "";
  updateSendButton();
  await sendQuery(text);
}

conversationPane.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const chip = target.closest<HTMLElement>(".citation-chip");
  if (chip?.dataset.sourceKey) {
    void inspectSource(chip.dataset.sourceKey);
  }
  const retry = target.closest<HTMLElement>(".retry");
  if (retry?.dataset.retryText) {
    retry.parentElement?.remove();
    void sendQuery(retry.dataset.retryText);
  }
});

catalogPane.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const link = target.closest<HTMLElement>(".dataset-link");
  if (link?.dataset.doi) {
    event.preventDefault();
    void openDataset(link.dataset.doi);
  }
  if (target.classList.contains("compare-pick")) {
    updateCompareButton();
  }
});

compareButton.addEventListener("click", () => void runCompare());

detailPane.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest<HTMLElement>(".manifest-download");
  if (target?.dataset.doi) {
    void downloadManifest(target.dataset.doi);
  }
});

async function start(): Promise<void> {
  updateSendButton();
  const stored = sessionStorage.getItem("robodex-session");
  if (stored) {
    sessionId = stored;
    try {
      await refreshConversation(); // a refresh re-renders the identical log
    } catch {
      sessionId = "";
    }
  }
  if (!sessionId) {
    sessionId = (await api.createSession()).session_id;
    sessionStorage.setItem("robodex-session", sessionId);
    conversationPane.innerHTML = "";
  }
  await refreshCatalog();
}

void start();
