/**
 * Raw-JSON revision editing.
 *
 * The editor is seeded with the serialized dialogue fetched from the
 * service, and serialization is plain `JSON.stringify(value, null, 2)`:
 * parsing the seed and serializing it again reproduces the seed byte for
 * byte, so an untouched editor round-trips losslessly and a byte
 * comparison against the seed detects modification. Before any revise
 * request leaves the browser, the editor content must parse as JSON and
 * pass the same shape rules the service applies; failures block the
 * submission client-side.
 */

import type { DialoguePayload, ItemPayload } from "./api.js";
import { SCENARIOS } from "./api.js";

export function serializeDialogue(value: unknown): string {
  return JSON.stringify(value, null, 2);
}

/** Editor prefill: the pending revision when one exists, else the original. */
export function editorSeed(item: ItemPayload): string {
  return serializeDialogue(item.revision ?? item.dialogue);
}

export function isUnmodified(editorText: string, item: ItemPayload): boolean {
  return editorText === editorSeed(item);
}

function isPlainObject(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

const ROLES = new Set(["user", "assistant", "tool"]);
const ACTION_KINDS = new Set(["ask", "call", "answer"]);

function callProblems(calls: unknown, where: string, problems: string[]): void {
  if (!Array.isArray(calls)) {
    problems.push(`${where}: calls must be an array`);
    return;
  }
  calls.forEach((call, index) => {
    if (!isPlainObject(call)) {
      problems.push(`${where}, call ${index}: must be an object`);
      return;
    }
    if (typeof call.name !== "string" || !call.name) {
      problems.push(`${where}, call ${index}: needs a non-empty tool name`);
    }
    if (!isPlainObject(call.arguments)) {
      problems.push(`${where}, call ${index}: arguments must be an object`);
    }
  });
}

function turnProblems(turn: unknown, index: number, problems: string[]): void {
  const where = `turn ${index}`;
  if (!isPlainObject(turn)) {
    problems.push(`${where}: must be an object`);
    return;
  }
  if (typeof turn.role !== "string" || !ROLES.has(turn.role)) {
    problems.push(`${where}: role must be one of user, assistant, tool`);
    return;
  }
  if (typeof turn.content !== "string") {
    problems.push(`${where}: content must be a string`);
  }
  if (turn.action !== undefined) {
    if (turn.role !== "assistant") {
      problems.push(`${where}: only assistant turns carry an action`);
    } else if (!isPlainObject(turn.action)) {
      problems.push(`${where}: action must be an object`);
    } else {
      const action = turn.action;
      if (typeof action.kind !== "string" || !ACTION_KINDS.has(action.kind)) {
        problems.push(`${where}: action kind must be ask, call, or answer`);
      } else if (action.kind === "call") {
        if (!Array.isArray(action.calls) || action.calls.length === 0) {
          problems.push(`${where}: a call action needs at least one tool call`);
        } else {
          callProblems(action.calls, where, problems);
        }
      } else if (typeof action.text !== "string" || !action.text) {
        problems.push(`${where}: an ${action.kind} action needs non-empty text`);
      }
    }
  }
  if (turn.tool_output !== undefined && turn.role !== "tool") {
    problems.push(`${where}: only tool turns carry a tool output`);
  }
}

/**
 * Shape problems for a candidate dialogue value; empty means the service's
 * own parser will accept it. Mirrors the server-side schema exactly.
 */
export function validateDialogue(value: unknown): string[] {
  const problems: string[] = [];
  if (!isPlainObject(value)) {
    return ["revision must be a JSON object"];
  }
  if (typeof value.id !== "string" || !value.id) {
    problems.push("id must be a non-empty string");
  }
  if (typeof value.scenario !== "string" || !(SCENARIOS as readonly string[]).includes(value.scenario)) {
    problems.push(`scenario must be one of ${SCENARIOS.join(", ")}`);
  }
  if (typeof value.type_label !== "string") {
    problems.push("type_label must be a string");
  }
  if (!isPlainObject(value.tools) || !Array.isArray(value.tools.targets)) {
    problems.push("tools must be an object with a targets array");
  }
  if (!Array.isArray(value.turns)) {
    problems.push("turns must be an array");
  } else {
    value.turns.forEach((turn, index) => turnProblems(turn, index, problems));
  }
  if (!Array.isArray(value.trajectory)) {
    problems.push("trajectory must be an array");
  } else {
    value.trajectory.forEach((entry, index) => {
      if (!isPlainObject(entry) || typeof entry.turn !== "number") {
        problems.push(`trajectory entry ${index}: needs a numeric turn index`);
      } else {
        callProblems(entry.calls, `trajectory entry ${index}`, problems);
      }
    });
  }
  if (value.meta !== undefined && !isPlainObject(value.meta)) {
    problems.push("meta must be an object");
  }
  return problems;
}

export type ParseOutcome =
  | { ok: true; value: DialoguePayload }
  | { ok: false; problems: string[] };

/** Parse + validate editor content; never throws. */
export function parseRevision(editorText: string): ParseOutcome {
  let value: unknown;
  try {
    value = JSON.parse(editorText);
  } catch (err) {
    return { ok: false, problems: [`not valid JSON: ${err instanceof Error ? err.message : String(err)}`] };
  }
  const problems = validateDialogue(value);
  if (problems.length > 0) {
    return { ok: false, problems };
  }
  return { ok: true, value: value as DialoguePayload };
}
