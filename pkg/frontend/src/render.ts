/**
 * HTML fragment builders. Pure string functions so they are testable
 * without a DOM; app.ts is the only module that touches document.
 *
 * Numbers (priority, confidence, flag rate) render via JSON.stringify,
 * the inverse of the JSON parse that produced them, so the screen shows
 * the service's value, not a reformatted one.
 */

import type { ItemPayload, QueueRow, Reason, StatsPayload, TurnPayload } from "./api.js";
import type { QueueView } from "./queue.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function num(value: number): string {
  return JSON.stringify(value);
}

export function renderQueue(view: QueueView): string {
  if (view.empty) {
    return '<p class="empty-state">No items match — the queue is clear.</p>';
  }
  const rows = view.rows
    .map(
      (row) => `<tr class="queue-row" data-id="${escapeHtml(row.id)}">
  <td class="id">${escapeHtml(row.id)}</td>
  <td><span class="priority-badge">${num(row.priority)}</span></td>
  <td>${escapeHtml(row.scenario)}</td>
  <td class="status-${escapeHtml(row.status)}">${escapeHtml(row.status)}${row.second_pass ? ' <span class="badge-second-pass">second pass</span>' : ""}</td>
  <td class="reasons">${row.reasons.map((r) => escapeHtml(r)).join("<br>")}</td>
</tr>`,
    )
    .join("\n");
  return `<table class="queue"><thead><tr><th>id</th><th>priority</th><th>scenario</th><th>status</th><th>reasons</th></tr></thead><tbody>${rows}</tbody></table>`;
}

export function renderVersionBanner(view: QueueView): string {
  return view.versionChanged
    ? '<div class="banner banner-update">Queue updated on the server — list refreshed.</div>'
    : "";
}

export function renderUnreachableBanner(message: string): string {
  return `<div class="banner banner-error">Review service unreachable: ${escapeHtml(message)} <button data-action="retry">Retry</button></div>`;
}

function renderReason(reason: Reason): string {
  if (reason.kind === "rule") {
    return `<li class="reason-rule"><strong>${escapeHtml(reason.rule)}</strong> ${escapeHtml(reason.hint)} <em>(${escapeHtml(reason.location)})</em></li>`;
  }
  const tags = reason.errors.length ? reason.errors.map(escapeHtml).join(", ") : "no tags";
  return `<li class="reason-checker">checker confidence <strong>${num(reason.confidence)}</strong> [${tags}] ${escapeHtml(reason.rationale)}</li>`;
}

function renderTurn(turn: TurnPayload, index: number): string {
  const parts = [`<div class="turn turn-${turn.role}" data-turn="${index}">`];
  parts.push(`<span class="role">${escapeHtml(turn.role)}</span>`);
  if (turn.content) {
    parts.push(`<p class="content">${escapeHtml(turn.content)}</p>`);
  }
  if (turn.action) {
    if (turn.action.kind === "call") {
      const panels = (turn.action.calls ?? [])
        .map(
          (call) => `<div class="call-panel"><code class="call-name">${escapeHtml(call.name)}</code><pre class="call-args">${escapeHtml(JSON.stringify(call.arguments, null, 2))}</pre></div>`,
        )
        .join("");
      parts.push(panels);
    } else {
      parts.push(`<span class="action-kind">${escapeHtml(turn.action.kind)}</span>`);
    }
  }
  if (turn.tool_output !== undefined) {
    parts.push(`<pre class="tool-output">${escapeHtml(turn.tool_output)}</pre>`);
  }
  parts.push("</div>");
  return parts.join("");
}

export function renderItem(item: ItemPayload): string {
  const turns = item.dialogue.turns.map((turn, index) => renderTurn(turn, index)).join("\n");
  const reasons = item.reasons.map(renderReason).join("\n");
  return `<section class="item" data-id="${escapeHtml(item.id)}">
<header><h2>${escapeHtml(item.id)}</h2>
<span class="priority-badge">${num(item.priority)}</span>
<span class="status-${escapeHtml(item.status)}">${escapeHtml(item.status)}${item.second_pass ? " (second pass)" : ""}</span>
</header>
<ul class="reasons">${reasons}</ul>
<div class="transcript">${turns}</div>
</section>`;
}

export function renderStats(stats: StatsPayload): string {
  return `<dl class="stats">
<dt>pending</dt><dd>${num(stats.pending)}</dd>
<dt>approved</dt><dd>${num(stats.approved)}</dd>
<dt>revised</dt><dd>${num(stats.revised)}</dd>
<dt>rejected</dt><dd>${num(stats.rejected)}</dd>
<dt>flag rate</dt><dd>${num(stats.flag_rate)}</dd>
</dl>`;
}

export function renderProblems(problems: string[]): string {
  if (problems.length === 0) {
    return "";
  }
  return `<ul class="problems">${problems.map((p) => `<li>${escapeHtml(p)}</li>`).join("")}</ul>`;
}
