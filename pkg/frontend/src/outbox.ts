import { ApiClient, NetworkError } from './api.js';
import type { DecisionBody } from './types.js';

interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

const STORAGE_KEY = 'bitextqc.outbox.v1';

/**
 * FIFO queue of decisions that could not be delivered (offline). Entries are
 * persisted so a reload loses nothing, and flushed strictly in submission
 * order; a conflict response counts as delivered (the server already holds a
 * terminal decision for that pair).
 */
export class Outbox {
  private queue: DecisionBody[] = [];

  constructor(private readonly storage: StorageLike | null = defaultStorage()) {
    const saved = this.storage?.getItem(STORAGE_KEY);
    if (saved) {
      try {
        this.queue = JSON.parse(saved) as DecisionBody[];
      } catch {
        this.queue = [];
      }
    }
  }

  get size(): number {
    return this.queue.length;
  }

  push(decision: DecisionBody): void {
    this.queue.push(decision);
    this.persist();
  }

  /**
   * Deliver queued decisions head-first. Stops (returning false) at the
   * first network failure so order is preserved; returns true once empty.
   */
  async flush(client: ApiClient): Promise<boolean> {
    while (this.queue.length > 0) {
      const head = this.queue[0]!;
      try {
        await client.submitDecision(head); // 'ok' and 'conflict' both delivered
      } catch (error) {
        if (error instanceof NetworkError) {
          return false;
        }
        throw error;
      }
      this.queue.shift();
      this.persist();
    }
    return true;
  }

  private persist(): void {
    if (!this.storage) return;
    if (this.queue.length === 0) {
      this.storage.removeItem(STORAGE_KEY);
    } else {
      this.storage.setItem(STORAGE_KEY, JSON.stringify(this.queue));
    }
  }
}

function defaultStorage(): StorageLike | null {
  try {
    return typeof localStorage === 'undefined' ? null : localStorage;
  } catch {
    return null;
  }
}
