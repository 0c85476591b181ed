import type { DecisionBody, NextResult, QueueStats, SubmitResult } from './types.js';

/** Transport failed (offline, timeout, 5xx); the operation may be retried. */
export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'NetworkError';
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (error) {
      throw new NetworkError(`request to ${path} failed: ${String(error)}`);
    }
    if (response.status >= 500) {
      throw new NetworkError(`server error ${response.status} on ${path}`);
    }
    return response;
  }

  async fetchNext(reviewer: string): Promise<NextResult> {
    const response = await this.request(
      `/api/queue/next?reviewer=${encodeURIComponent(reviewer)}`,
    );
    if (response.status === 204) {
      return { kind: 'done' };
    }
    if (!response.ok) {
      throw new NetworkError(`unexpected status ${response.status} from queue`);
    }
    return { kind: 'card', card: await response.json() };
  }

  /**
   * Post one decision. A 409 means the pair already has a terminal decision
   * on the server, which makes client retries idempotent: the caller treats
   * 'conflict' as delivered.
   */
  async submitDecision(body: DecisionBody): Promise<SubmitResult> {
    const response = await this.request('/api/decision', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (response.status === 409) {
      return 'conflict';
    }
    if (!response.ok) {
      throw new NetworkError(`decision rejected with status ${response.status}`);
    }
    return 'ok';
  }

  async fetchStats(): Promise<QueueStats> {
    const response = await this.request('/api/stats');
    if (!response.ok) {
      throw new NetworkError(`unexpected status ${response.status} from stats`);
    }
    return response.json();
  }
}
