/**
 * Decision submission flow.
 *
 * Revisions are validated client-side before any request is sent; every
 * failure outcome hands the untouched editor text back to the caller, so a
 * conflict, a validation rejection, or a dead network can never lose a
 * reviewer's edits. Conflicts (another tab decided first) are surfaced for
 * an explicit reload — never auto-merged.
 */

import type { DecisionBody, DecisionKind, ItemPayload, ReviewApi } from "./api.js";
import { ApiError } from "./api.js";
import { parseRevision } from "./revision.js";

export type SubmitOutcome =
  | { kind: "ok"; item: ItemPayload; version: number }
  | { kind: "blocked"; problems: string[]; editorText: string }
  | { kind: "conflict"; message: string; editorText: string }
  | { kind: "invalid"; message: string; editorText: string }
  | { kind: "not_found"; message: string }
  | { kind: "unreachable"; message: string; editorText: string };

export async function submitDecision(
  api: ReviewApi,
  itemId: string,
  decision: DecisionKind,
  reviewer: string,
  editorText: string,
  knownVersion?: number,
): Promise<SubmitOutcome> {
  if (!reviewer.trim()) {
    return { kind: "blocked", problems: ["reviewer name is required"], editorText };
  }
  const body: DecisionBody = { decision, reviewer };
  if (decision === "revise") {
    const parsed = parseRevision(editorText);
    if (!parsed.ok) {
      return { kind: "blocked", problems: parsed.problems, editorText };
    }
    body.revision = parsed.value;
  }
  try {
    const { data, version } = await api.submitDecision(itemId, body, knownVersion);
    return { kind: "ok", item: data, version };
  } catch (err) {
    if (err instanceof ApiError) {
      switch (err.code) {
        case "conflict":
          return { kind: "conflict", message: err.message, editorText };
        case "not_found":
          return { kind: "not_found", message: err.message };
        default:
          return { kind: "invalid", message: err.message, editorText };
      }
    }
    return {
      kind: "unreachable",
      message: err instanceof Error ? err.message : String(err),
      editorText,
    };
  }
}
