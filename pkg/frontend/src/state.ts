/** Pure review-session state: item list, cursor, and decision counts. */

import type { ReviewItem, Status } from "./types.js";

export interface Progress {
  total: number;
  pending: number;
  decided: number;
}

export class ReviewSession {
  private items: ReviewItem[];
  private index: number;

  constructor(items: ReviewItem[]) {
    this.items = items.slice();
    this.index = 0;
    this.seekPending();
  }

  /** Move the cursor forward to the first pending item, if any remain. */
  private seekPending(): void {
    if (this.items.length === 0) return;
    const n = this.items.length;
    for (let step = 0; step < n; step += 1) {
      const probe = (this.index + step) % n;
      if (this.items[probe].status === "pending") {
        this.index = probe;
        return;
      }
    }
    this.index = Math.min(this.index, n - 1);
  }

  get size(): number {
    return this.items.length;
  }

  get cursor(): number {
    return this.index;
  }

  current(): ReviewItem | null {
    return this.items.length > 0 ? this.items[this.index] : null;
  }

  all(): ReviewItem[] {
    return this.items.slice();
  }

  /** Replace the decided item with the server's copy and advance. */
  recordDecision(updated: ReviewItem): void {
    const at = this.items.findIndex((i) => i.item_id === updated.item_id);
    if (at >= 0) this.items[at] = updated;
    this.advance();
  }

  advance(): void {
    if (this.items.length === 0) return;
    this.index = (this.index + 1) % this.items.length;
    this.seekPending();
  }

  retreat(): void {
    if (this.items.length === 0) return;
    this.index = (this.index - 1 + this.items.length) % this.items.length;
  }

  counts(): Record<Status, number> {
    const out: Record<Status, number> = {
      pending: 0,
      accepted: 0,
      rejected: 0,
      relabeled: 0,
      adjusted: 0,
    };
    for (const item of this.items) out[item.status] += 1;
    return out;
  }

  progress(): Progress {
    const counts = this.counts();
    return {
      total: this.items.length,
      pending: counts.pending,
      decided: this.items.length - counts.pending,
    };
  }
}
