/**
 * Browser entry point. All DOM access lives here; the state and
 * formatting logic it calls is in the sibling modules so it stays
 * testable under node.
 *
 * Service base URL comes from the `?service=` query parameter and
 * defaults to http://127.0.0.1:8765. The page never mutates review
 * state except through submitDecision.
 */

import { ApiError, ReviewApi, type DecisionKind, type ItemPayload, type ReviewStatus } from "./api.js";
import { submitDecision } from "./decisions.js";
import { QueuePoller, type QueueView } from "./queue.js";
import { editorSeed } from "./revision.js";
import {
  renderItem,
  renderProblems,
  renderQueue,
  renderStats,
  renderUnreachableBanner,
  renderVersionBanner,
} from "./render.js";

const POLL_INTERVAL_MS = 5000;

function requireElement<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing #${id} in index.html`);
  }
  return node as T;
}

function serviceBaseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("service");
  return fromQuery || "http://127.0.0.1:8765";
}

export function start(): void {
  const api = new ReviewApi(serviceBaseUrl());

  const bannerHost = requireElement<HTMLDivElement>("banner");
  const queueHost = requireElement<HTMLDivElement>("queue");
  const statsHost = requireElement<HTMLDivElement>("stats");
  const itemHost = requireElement<HTMLDivElement>("item");
  const editor = requireElement<HTMLTextAreaElement>("editor");
  const reviewerInput = requireElement<HTMLInputElement>("reviewer");
  const statusFilter = requireElement<HTMLSelectElement>("status-filter");
  const feedbackHost = requireElement<HTMLDivElement>("feedback");

  let currentItem: ItemPayload | null = null;
  let currentVersion: number | undefined;

  function showFeedback(html: string): void {
    feedbackHost.innerHTML = html;
  }

  async function refreshStats(): Promise<void> {
    try {
      const reply = await api.getStats();
      statsHost.innerHTML = renderStats(reply.data);
    } catch {
      statsHost.innerHTML = "";
    }
  }

  async function openItem(id: string): Promise<void> {
    try {
      const reply = await api.getItem(id);
      currentItem = reply.data;
      currentVersion = reply.version;
      itemHost.innerHTML = renderItem(reply.data);
      editor.value = editorSeed(reply.data);
      showFeedback("");
    } catch (error) {
      if (error instanceof ApiError) {
        showFeedback(`<p class="problem">${error.code}: ${error.message}</p>`);
      } else {
        bannerHost.innerHTML = renderUnreachableBanner(String(error));
      }
    }
  }

  function onQueueUpdate(view: QueueView): void {
    bannerHost.innerHTML = renderVersionBanner(view);
    queueHost.innerHTML = renderQueue(view);
    for (const row of queueHost.querySelectorAll<HTMLTableRowElement>("tr.queue-row")) {
      row.addEventListener("click", () => {
        const id = row.dataset["id"];
        if (id) {
          void openItem(id);
        }
      });
    }
  }

  function onQueueError(error: unknown): void {
    const message = error instanceof Error ? error.message : String(error);
    bannerHost.innerHTML = renderUnreachableBanner(message);
    const retry = bannerHost.querySelector<HTMLButtonElement>('button[data-action="retry"]');
    retry?.addEventListener("click", () => {
      void poller.refresh();
      void refreshStats();
    });
  }

  const poller = new QueuePoller(api, onQueueUpdate, onQueueError, POLL_INTERVAL_MS);

  statusFilter.addEventListener("change", () => {
    const value = statusFilter.value;
    poller.filters = value ? { status: value as ReviewStatus } : {};
    void poller.refresh();
  });

  async function decide(decision: DecisionKind): Promise<void> {
    if (!currentItem) {
      showFeedback('<p class="problem">Select an item first.</p>');
      return;
    }
    const outcome = await submitDecision(
      api,
      currentItem.id,
      decision,
      reviewerInput.value,
      editor.value,
      currentVersion,
    );
    switch (outcome.kind) {
      case "ok":
        currentItem = outcome.item;
        currentVersion = outcome.version;
        itemHost.innerHTML = renderItem(outcome.item);
        editor.value = editorSeed(outcome.item);
        showFeedback('<p class="ok">Decision recorded.</p>');
        await poller.refresh();
        await refreshStats();
        break;
      case "blocked":
        editor.value = outcome.editorText;
        showFeedback(`<p class="problem">Not sent:</p>${renderProblems(outcome.problems)}`);
        break;
      case "conflict":
        editor.value = outcome.editorText;
        showFeedback(
          `<p class="problem">Conflict: ${outcome.message} ` +
            'Your edits are untouched above; <button data-action="reload-item">reload the item</button> to see the latest state.</p>',
        );
        feedbackHost
          .querySelector<HTMLButtonElement>('button[data-action="reload-item"]')
          ?.addEventListener("click", () => {
            if (currentItem) {
              void openItem(currentItem.id);
            }
          });
        break;
      case "invalid":
        editor.value = outcome.editorText;
        showFeedback(`<p class="problem">Rejected by the service: ${outcome.message}</p>`);
        break;
      case "not_found":
        showFeedback(`<p class="problem">${outcome.message}</p>`);
        break;
      case "unreachable":
        editor.value = outcome.editorText;
        bannerHost.innerHTML = renderUnreachableBanner(outcome.message);
        break;
    }
  }

  requireElement<HTMLButtonElement>("approve").addEventListener("click", () => void decide("approve"));
  requireElement<HTMLButtonElement>("revise").addEventListener("click", () => void decide("revise"));
  requireElement<HTMLButtonElement>("reject").addEventListener("click", () => void decide("reject"));

  poller.start();
  void refreshStats();
  window.setInterval(() => void refreshStats(), POLL_INTERVAL_MS);
}

if (typeof document !== "undefined") {
  start();
}
