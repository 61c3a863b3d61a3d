/** Shared fixtures and fetch doubles for the UI test suites. */

import { vi } from "vitest";
import type {
  DialoguePayload,
  FetchLike,
  ItemPayload,
  QueueRow,
} from "../src/api.js";

/**
 * A dialogue shaped exactly like the service serializes one: ask-then-call
 * flow with a tool turn, a trajectory entry, and nested call arguments.
 */
export function validDialogue(id = "d00042"): DialoguePayload {
  return {
    id,
    scenario: "single_single",
    type_label: "calendar scheduling",
    tools: { targets: ["event_create"], distractors: ["event_list"] },
    turns: [
      { role: "user", content: "Book a sync with Dana tomorrow." },
      {
        role: "assistant",
        content: "What time should the sync start?",
        action: { kind: "ask", text: "What time should the sync start?" },
      },
      { role: "user", content: "Make it 14:00 for half an hour." },
      {
        role: "assistant",
        content: "",
        action: {
          kind: "call",
          calls: [
            {
              name: "event_create",
              arguments: { title: "Sync with Dana", start: "14:00", duration_minutes: 30 },
            },
          ],
        },
      },
      {
        role: "tool",
        content: "",
        tool_output: '{"ok": true, "event_id": "ev-771"}',
      },
      {
        role: "assistant",
        content: "Done - the sync is booked for 14:00.",
        action: { kind: "answer", text: "Done - the sync is booked for 14:00." },
      },
    ],
    trajectory: [
      {
        turn: 3,
        kind: "call",
        calls: [
          {
            name: "event_create",
            arguments: { title: "Sync with Dana", start: "14:00", duration_minutes: 30 },
          },
        ],
      },
    ],
    meta: { group: "calendar" },
  };
}

export function itemPayload(overrides: Partial<ItemPayload> = {}): ItemPayload {
  return {
    id: "d00042",
    dialogue: validDialogue(),
    reasons: [
      {
        kind: "checker",
        confidence: 0.4,
        errors: ["intent"],
        rationale: "final answer may not match the request",
      },
    ],
    priority: 1.0,
    status: "pending",
    second_pass: false,
    revision: null,
    ...overrides,
  };
}

export function queueRow(id: string, priority: number, overrides: Partial<QueueRow> = {}): QueueRow {
  return {
    id,
    priority,
    scenario: "single_single",
    status: "pending",
    second_pass: false,
    reasons: [`checker confidence 0.4: intent`],
    ...overrides,
  };
}

export function envelope(data: unknown, version: number): unknown {
  return { data, version };
}

export function errorEnvelope(code: string, message: string, version: number): unknown {
  return { error: { code, message }, version };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export interface RecordedCall {
  url: string;
  init: RequestInit | undefined;
}

/**
 * A fetch double that replays queued responses in order and records every
 * request. A fresh Response is built per call so bodies can be consumed.
 */
export function recordingFetch(
  ...replies: Array<{ body: unknown; status?: number } | Error>
): { fetchFn: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const queue = [...replies];
  const fetchFn = vi.fn(async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const next = queue.length > 1 ? queue.shift() : queue[0];
    if (next === undefined) {
      throw new Error("no scripted reply left");
    }
    if (next instanceof Error) {
      throw next;
    }
    return jsonResponse(next.body, next.status ?? 200);
  });
  return { fetchFn, calls };
}
