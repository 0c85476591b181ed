import { ApiClient, NetworkError } from './api.js';
import { Outbox } from './outbox.js';
import type { DecisionBody, DiscrepancyLabel, QueueStats, ReviewCard, Verdict } from './types.js';
import { DEFECT_LABELS } from './types.js';

export interface AppOptions {
  reviewer: string;
  /** stats auto-refresh period; 0 disables the timer (tests drive manually) */
  refreshMs?: number;
  outbox?: Outbox;
}

type Phase =
  | { name: 'loading' }
  | { name: 'reviewing'; card: ReviewCard }
  | { name: 'done' }
  | { name: 'offline'; message: string };

/**
 * Review loop controller: fetch a card, take one verdict (buttons or
 * keyboard: A accept, R reject, F flag, 1-5 defect labels), submit, repeat.
 * Cards render exactly as served; no client-side text normalization.
 */
export class App {
  private phase: Phase = { name: 'loading' };
  private stats: QueueStats | null = null;
  private toast = '';
  private rejectArmed = false;
  private readonly outbox: Outbox;
  private readonly refreshMs: number;
  private timer: ReturnType<typeof setInterval> | null = null;
  private pendingOps = 0;
  private idleResolvers: Array<() => void> = [];
  private readonly keyListener = (event: KeyboardEvent) => {
    void this.track(this.onKey(event.key));
  };

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly options: AppOptions,
  ) {
    this.outbox = options.outbox ?? new Outbox();
    this.refreshMs = options.refreshMs ?? 10_000;
  }

  async start(): Promise<void> {
    this.root.ownerDocument.addEventListener('keydown', this.keyListener as EventListener);
    if (this.refreshMs > 0) {
      this.timer = setInterval(() => void this.track(this.refreshStats()), this.refreshMs);
    }
    await this.track(
      (async () => {
        await this.refreshStats();
        await this.advance();
      })(),
    );
  }

  destroy(): void {
    this.root.ownerDocument.removeEventListener('keydown', this.keyListener as EventListener);
    if (this.timer !== null) {
      clearInterval(this.timer);
    }
  }

  /** Resolves once every in-flight network operation has settled. */
  whenIdle(): Promise<void> {
    if (this.pendingOps === 0) return Promise.resolve();
    return new Promise((resolve) => this.idleResolvers.push(resolve));
  }

  get currentCard(): ReviewCard | null {
    return this.phase.name === 'reviewing' ? this.phase.card : null;
  }

  private track<T>(work: Promise<T>): Promise<T> {
    this.pendingOps += 1;
    return work.finally(() => {
      this.pendingOps -= 1;
      if (this.pendingOps === 0) {
        const resolvers = this.idleResolvers;
        this.idleResolvers = [];
        resolvers.forEach((resolve) => resolve());
      }
    });
  }

  private async onKey(key: string): Promise<void> {
    if (this.phase.name !== 'reviewing') return;
    const lower = key.toLowerCase();
    if (lower === 'a') {
      await this.decide('accept');
    } else if (lower === 'f') {
      await this.decide('flag');
    } else if (lower === 'r') {
      if (this.rejectArmed) {
        await this.decide('reject');
      } else {
        this.rejectArmed = true;
        this.render();
      }
    } else if (lower === 'escape') {
      this.rejectArmed = false;
      this.render();
    } else if (this.rejectArmed && key >= '1' && key <= '5') {
      await this.decide('reject', DEFECT_LABELS[Number(key) - 1]);
    }
  }

  async decide(verdict: Verdict, label?: DiscrepancyLabel): Promise<void> {
    if (this.phase.name !== 'reviewing') return;
    const body: DecisionBody = {
      pair_id: this.phase.card.pair_id,
      verdict,
      reviewer: this.options.reviewer,
    };
    if (label) body.label = label;
    this.rejectArmed = false;
    try {
      const result = await this.client.submitDecision(body);
      this.toast = result === 'conflict' ? 'Pair was already decided elsewhere.' : '';
    } catch (error) {
      if (!(error instanceof NetworkError)) throw error;
      // keep the decision: queue locally, flush on reconnect in order
      this.outbox.push(body);
      this.phase = { name: 'offline', message: 'Connection lost; decision queued.' };
      this.render();
      return;
    }
    await this.refreshStats();
    await this.advance();
  }

  /** Retry after a connection failure: flush queued decisions, then resume. */
  async retry(): Promise<void> {
    const flushed = await this.outbox.flush(this.client);
    if (!flushed) {
      this.phase = {
        name: 'offline',
        message: `Still offline; ${this.outbox.size} decision(s) queued.`,
      };
      this.render();
      return;
    }
    this.toast = '';
    await this.refreshStats();
    await this.advance();
  }

  private async advance(): Promise<void> {
    try {
      const next = await this.client.fetchNext(this.options.reviewer);
      this.phase = next.kind === 'done' ? { name: 'done' } : { name: 'reviewing', card: next.card };
    } catch (error) {
      if (!(error instanceof NetworkError)) throw error;
      this.phase = { name: 'offline', message: 'Cannot reach the review service.' };
    }
    this.render();
  }

  private async refreshStats(): Promise<void> {
    try {
      this.stats = await this.client.fetchStats();
    } catch (error) {
      if (!(error instanceof NetworkError)) throw error; // stale stats are fine
    }
    this.render();
  }

  private render(): void {
    const doc = this.root.ownerDocument;
    this.root.textContent = '';
    this.root.appendChild(this.renderProgress(doc));
    if (this.toast) {
      const toast = doc.createElement('div');
      toast.className = 'toast';
      toast.id = 'toast';
      toast.textContent = this.toast;
      this.root.appendChild(toast);
    }
    switch (this.phase.name) {
      case 'loading': {
        const note = doc.createElement('p');
        note.textContent = 'Loading…';
        this.root.appendChild(note);
        break;
      }
      case 'reviewing':
        this.root.appendChild(this.renderCard(doc, this.phase.card));
        break;
      case 'done':
        this.root.appendChild(this.renderDone(doc));
        break;
      case 'offline':
        this.root.appendChild(this.renderOffline(doc, this.phase.message));
        break;
    }
  }

  private renderProgress(doc: Document): HTMLElement {
    const box = doc.createElement('header');
    box.className = 'progress';
    box.id = 'progress';
    if (!this.stats) {
      box.textContent = 'queue: —';
      return box;
    }
    const { pending, leased, decided, defect_rate } = this.stats;
    const total = pending + leased + decided;
    const percent = total > 0 ? (100 * decided) / total : 0;
    const text = doc.createElement('span');
    text.id = 'progress-text';
    text.textContent =
      `decided ${decided} / ${total} · pending ${pending} · leased ${leased} · ` +
      `defect rate ${(100 * defect_rate).toFixed(1)}%`;
    const bar = doc.createElement('div');
    bar.className = 'bar';
    const fill = doc.createElement('div');
    fill.className = 'fill';
    fill.style.width = `${percent.toFixed(1)}%`;
    bar.appendChild(fill);
    box.appendChild(text);
    box.appendChild(bar);
    return box;
  }

  private renderCard(doc: Document, card: ReviewCard): HTMLElement {
    const section = doc.createElement('section');
    section.className = 'card';
    section.id = 'card';
    section.dataset.pairId = card.pair_id;

    const meta = doc.createElement('div');
    meta.className = 'meta';
    meta.textContent =
      `${card.pair_id}` +
      (card.score !== undefined ? ` · score ${card.score.toFixed(3)}` : '') +
      ` · lease until ${card.lease_expiry}`;
    section.appendChild(meta);

    const texts = doc.createElement('div');
    texts.className = 'texts';
    const src = doc.createElement('p');
    src.className = 'src';
    src.id = 'card-src';
    src.textContent = card.src;
    const tgt = doc.createElement('p');
    tgt.className = 'tgt';
    tgt.id = 'card-tgt';
    tgt.textContent = card.tgt;
    texts.appendChild(src);
    texts.appendChild(tgt);
    section.appendChild(texts);

    const actions = doc.createElement('div');
    actions.className = 'actions';
    const buttons: Array<[string, string, () => void]> = [
      ['btn-accept', 'Accept (A)', () => void this.track(this.decide('accept'))],
      ['btn-reject', this.rejectArmed ? 'Reject unlabeled (R)' : 'Reject… (R)', () => void this.track(this.onKey('r'))],
      ['btn-flag', 'Flag (F)', () => void this.track(this.decide('flag'))],
    ];
    for (const [id, text, onClick] of buttons) {
      const button = doc.createElement('button');
      button.id = id;
      button.textContent = text;
      button.addEventListener('click', onClick);
      actions.appendChild(button);
    }
    section.appendChild(actions);

    if (this.rejectArmed) {
      const picker = doc.createElement('div');
      picker.className = 'labels';
      picker.id = 'label-picker';
      DEFECT_LABELS.forEach((label, index) => {
        const button = doc.createElement('button');
        button.id = `label-${index + 1}`;
        button.textContent = `${index + 1} ${label}`;
        button.addEventListener('click', () => void this.track(this.decide('reject', label)));
        picker.appendChild(button);
      });
      const hint = doc.createElement('p');
      hint.className = 'hint';
      hint.textContent = 'Pick a discrepancy label 1-5, press R for unlabeled reject, Esc to cancel.';
      picker.appendChild(hint);
      section.appendChild(picker);
    }
    return section;
  }

  private renderDone(doc: Document): HTMLElement {
    const section = doc.createElement('section');
    section.className = 'done';
    section.id = 'done';
    const heading = doc.createElement('h2');
    heading.textContent = 'Queue complete';
    section.appendChild(heading);
    if (this.stats) {
      const summary = doc.createElement('p');
      summary.id = 'done-summary';
      summary.textContent =
        `${this.stats.decided} pairs decided · ` +
        `defect rate ${(100 * this.stats.defect_rate).toFixed(1)}%`;
      section.appendChild(summary);
      const labels = doc.createElement('ul');
      labels.id = 'done-labels';
      for (const [label, count] of Object.entries(this.stats.per_label)) {
        const item = doc.createElement('li');
        item.textContent = `${label}: ${count}`;
        labels.appendChild(item);
      }
      section.appendChild(labels);
    }
    return section;
  }

  private renderOffline(doc: Document, message: string): HTMLElement {
    const banner = doc.createElement('section');
    banner.className = 'offline';
    banner.id = 'offline';
    const text = doc.createElement('p');
    text.textContent = `${message} Queued decisions: ${this.outbox.size}.`;
    banner.appendChild(text);
    const button = doc.createElement('button');
    button.id = 'btn-retry';
    button.textContent = 'Retry';
    button.addEventListener('click', () => void this.track(this.retry()));
    banner.appendChild(button);
    return banner;
  }
}
