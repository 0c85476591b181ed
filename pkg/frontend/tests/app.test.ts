import { beforeEach, describe, expect, it } from 'vitest';

import { ApiClient, NetworkError } from '../src/api.js';
import { App } from '../src/app.js';
import { Outbox } from '../src/outbox.js';
import type { DecisionBody, QueueStats, ReviewCard } from '../src/types.js';

class MemoryStorage {
  private map = new Map<string, string>();
  getItem(key: string) {
    return this.map.get(key) ?? null;
  }
  setItem(key: string, value: string) {
    this.map.set(key, value);
  }
  removeItem(key: string) {
    this.map.delete(key);
  }
}

/** In-memory stand-in for the curation service with the same semantics. */
class FakeService {
  log: DecisionBody[] = [];
  offline = false;
  private decided = new Set<string>();
  private leases = new Map<string, string>();

  constructor(private cards: ReviewCard[]) {}

  decideServerSide(pairId: string) {
    this.decided.add(pairId);
    this.log.push({ pair_id: pairId, verdict: 'accept', reviewer: 'elsewhere' });
  }

  asClient(): ApiClient {
    const service = this;
    return {
      async fetchNext(reviewer: string) {
        if (service.offline) throw new NetworkError('offline');
        for (const card of service.cards) {
          const holder = service.leases.get(card.pair_id);
          if (!service.decided.has(card.pair_id) && (holder === undefined || holder === reviewer)) {
            service.leases.set(card.pair_id, reviewer);
            return { kind: 'card' as const, card };
          }
        }
        return { kind: 'done' as const };
      },
      async submitDecision(body: DecisionBody) {
        if (service.offline) throw new NetworkError('offline');
        if (service.decided.has(body.pair_id)) return 'conflict' as const;
        service.decided.add(body.pair_id);
        service.leases.delete(body.pair_id);
        service.log.push(body);
        return 'ok' as const;
      },
      async fetchStats(): Promise<QueueStats> {
        if (service.offline) throw new NetworkError('offline');
        const decided = service.decided.size;
        const leased = [...service.leases.keys()].filter((id) => !service.decided.has(id)).length;
        const perLabel: Record<string, number> = {};
        let defects = 0;
        for (const decision of service.log) {
          const label =
            decision.label ?? (decision.verdict === 'accept' ? 'Accurate' : 'Unspecified');
          perLabel[label] = (perLabel[label] ?? 0) + 1;
          if (label !== 'Accurate') defects += 1;
        }
        return {
          pending: service.cards.length - decided - leased,
          leased,
          decided,
          per_label: perLabel,
          defect_rate: decided > 0 ? defects / decided : 0,
        };
      },
    } as unknown as ApiClient;
  }
}

function cards(n: number): ReviewCard[] {
  return Array.from({ length: n }, (_, i) => ({
    pair_id: `p${i}`,
    src: `source  ${i}`, // double space on purpose: rendered exactly as served
    tgt: `लक्ष्य ${i}`,
    score: 0.8,
    lease_expiry: '2026-01-01T00:00:00+00:00',
  }));
}

async function startApp(service: FakeService) {
  document.body.innerHTML = '<main id="app"></main>';
  const root = document.getElementById('app')!;
  const app = new App(root, service.asClient(), {
    reviewer: 'rev',
    refreshMs: 0,
    outbox: new Outbox(new MemoryStorage()),
  });
  await app.start();
  return { app, root };
}

async function press(app: App, key: string) {
  document.dispatchEvent(new KeyboardEvent('keydown', { key }));
  await app.whenIdle();
}

describe('App review flow', () => {
  beforeEach(() => {
    document.body.innerHTML = '';
  });

  it('renders the served card verbatim', async () => {
    const service = new FakeService(cards(2));
    const { app } = await startApp(service);
    expect(document.getElementById('card-src')!.textContent).toBe('source  0');
    expect(document.getElementById('card-tgt')!.textContent).toBe('लक्ष्य 0');
    expect(document.getElementById('card')!.dataset.pairId).toBe('p0');
    app.destroy();
  });

  it('A accepts and advances to the next card', async () => {
    const service = new FakeService(cards(2));
    const { app } = await startApp(service);
    await press(app, 'a');
    expect(service.log).toEqual([{ pair_id: 'p0', verdict: 'accept', reviewer: 'rev' }]);
    expect(document.getElementById('card')!.dataset.pairId).toBe('p1');
    app.destroy();
  });

  it('R then 2 posts a reject with DifferentMeaning', async () => {
    const service = new FakeService(cards(2));
    const { app } = await startApp(service);
    await press(app, 'r');
    expect(document.getElementById('label-picker')).not.toBeNull();
    await press(app, '2');
    expect(service.log[0]).toEqual({
      pair_id: 'p0',
      verdict: 'reject',
      label: 'DifferentMeaning',
      reviewer: 'rev',
    });
    app.destroy();
  });

  it('R twice posts an unlabeled reject', async () => {
    const service = new FakeService(cards(1));
    const { app } = await startApp(service);
    await press(app, 'r');
    await press(app, 'r');
    expect(service.log[0]).toEqual({ pair_id: 'p0', verdict: 'reject', reviewer: 'rev' });
    app.destroy();
  });

  it('digits do nothing unless the reject picker is armed', async () => {
    const service = new FakeService(cards(1));
    const { app } = await startApp(service);
    await press(app, '3');
    expect(service.log).toHaveLength(0);
    app.destroy();
  });

  it('F flags the pair', async () => {
    const service = new FakeService(cards(1));
    const { app } = await startApp(service);
    await press(app, 'f');
    expect(service.log[0]!.verdict).toBe('flag');
    app.destroy();
  });

  it('shows a conflict toast and fetches the next card on 409', async () => {
    const service = new FakeService(cards(3));
    const { app } = await startApp(service);
    service.decideServerSide('p0');
    await press(app, 'a');
    expect(document.getElementById('toast')!.textContent).toContain('already decided');
    expect(document.getElementById('card')!.dataset.pairId).toBe('p1');
    // the conflicting submission did not duplicate anything in the log
    expect(service.log.filter((d) => d.reviewer === 'rev')).toHaveLength(0);
    app.destroy();
  });

  it('reaching the end shows the completion screen with stats', async () => {
    const service = new FakeService(cards(1));
    const { app } = await startApp(service);
    await press(app, 'a');
    expect(document.getElementById('done')).not.toBeNull();
    expect(document.getElementById('done-summary')!.textContent).toContain('1 pairs decided');
    app.destroy();
  });

  it('progress header mirrors service stats after each decision', async () => {
    const service = new FakeService(cards(4));
    const { app } = await startApp(service);
    await press(app, 'a');
    await press(app, 'r');
    await press(app, '1');
    const text = document.getElementById('progress-text')!.textContent!;
    expect(text).toContain('decided 2 / 4');
    expect(text).toContain('defect rate 50.0%');
    app.destroy();
  });

  it('queues decisions while offline and flushes them in order on retry', async () => {
    const service = new FakeService(cards(3));
    const { app } = await startApp(service);
    await press(app, 'a'); // p0 delivered online
    service.offline = true;
    await press(app, 'a'); // p1 queued
    expect(document.getElementById('offline')!.textContent).toContain('Queued decisions: 1');
    expect(service.log).toHaveLength(1);

    service.offline = false;
    (document.getElementById('btn-retry') as HTMLButtonElement).click();
    await app.whenIdle();
    expect(service.log.map((d) => d.pair_id)).toEqual(['p0', 'p1']);
    expect(document.getElementById('card')!.dataset.pairId).toBe('p2');

    await press(app, 'a');
    expect(service.log.map((d) => d.pair_id)).toEqual(['p0', 'p1', 'p2']);
    expect(document.getElementById('done')).not.toBeNull();
    app.destroy();
  });

  it('keeps the retry banner while still offline, losing nothing', async () => {
    const service = new FakeService(cards(2));
    const { app } = await startApp(service);
    service.offline = true;
    await press(app, 'a');
    (document.getElementById('btn-retry') as HTMLButtonElement).click();
    await app.whenIdle();
    expect(document.getElementById('offline')!.textContent).toContain('Still offline');
    service.offline = false;
    (document.getElementById('btn-retry') as HTMLButtonElement).click();
    await app.whenIdle();
    expect(service.log.map((d) => d.pair_id)).toEqual(['p0']);
    app.destroy();
  });
});
