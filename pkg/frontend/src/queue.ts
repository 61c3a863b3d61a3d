/**
 * Queue listing logic: the service serves rows ordered by priority
 * descending with id ascending as the tiebreak, and this module applies the
 * identical comparator so local filtering can never reorder what reviewers
 * see. Updates arrive by polling; a version change between polls raises a
 * "queue updated" banner flag.
 */

import type { QueueRow, ReviewApi, ReviewStatus, Versioned, QueuePayload } from "./api.js";

export interface QueueFilters {
  status?: ReviewStatus | "";
  scenario?: string | "";
}

export interface QueueView {
  rows: QueueRow[];
  version: number;
  empty: boolean;
  versionChanged: boolean;
}

/** Same ordering the service uses: priority descending, then id ascending. */
export function serviceOrder(a: QueueRow, b: QueueRow): number {
  if (a.priority !== b.priority) {
    return b.priority - a.priority;
  }
  return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
}

export function sortRows(rows: readonly QueueRow[]): QueueRow[] {
  return [...rows].sort(serviceOrder);
}

export function applyFilters(rows: readonly QueueRow[], filters: QueueFilters): QueueRow[] {
  return rows.filter(
    (row) =>
      (!filters.status || row.status === filters.status) &&
      (!filters.scenario || row.scenario === filters.scenario),
  );
}

export function buildQueueView(
  reply: Versioned<QueuePayload>,
  filters: QueueFilters = {},
  previousVersion?: number,
): QueueView {
  const rows = sortRows(applyFilters(reply.data.items, filters));
  return {
    rows,
    version: reply.version,
    empty: rows.length === 0,
    versionChanged: previousVersion !== undefined && reply.version !== previousVersion,
  };
}

export type QueueUpdateHandler = (view: QueueView) => void;
export type QueueErrorHandler = (error: unknown) => void;

/** Polls GET /api/queue on a fixed interval (default 5s). */
export class QueuePoller {
  private timer: ReturnType<typeof setInterval> | undefined;
  private lastVersion: number | undefined;
  filters: QueueFilters = {};

  constructor(
    private readonly api: ReviewApi,
    private readonly onUpdate: QueueUpdateHandler,
    private readonly onError: QueueErrorHandler,
    readonly intervalMs: number = 5000,
  ) {}

  async refresh(): Promise<void> {
    try {
      const status = this.filters.status || undefined;
      const reply = await this.api.getQueue(status as ReviewStatus | undefined);
      const view = buildQueueView(reply, this.filters, this.lastVersion);
      this.lastVersion = reply.version;
      this.onUpdate(view);
    } catch (error) {
      this.onError(error);
    }
  }

  start(): void {
    if (this.timer === undefined) {
      this.timer = setInterval(() => void this.refresh(), this.intervalMs);
    }
    void this.refresh();
  }

  stop(): void {
    if (this.timer !== undefined) {
      clearInterval(this.timer);
      this.timer = undefined;
    }
  }
}
