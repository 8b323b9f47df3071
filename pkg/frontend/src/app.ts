// DOM wiring for the review page: queue sidebar, sample detail, and the
// keyboard-driven decision flow. At most one decision POST is in flight;
// queue refreshes supersede each other.

import { ApiError, createClient } from './api.js';
import type { ApiClient, FetchFn } from './api.js';
import {
  initialState,
  keyToAction,
  neighborId,
  nextPendingId,
  validateDraft,
  withQueue,
} from './state.js';
import type { ViewState } from './state.js';
import { FAILURE_MODES } from './types.js';
import type { FailureMode, SampleDetail, Verdict } from './types.js';

const REVIEWER_KEY = 'afforda.reviewer';

export interface AppOptions {
  baseUrl?: string;
  fetchFn?: FetchFn;
  storage?: Pick<Storage, 'getItem' | 'setItem'>;
}

export class ReviewApp {
  readonly root: HTMLElement;
  readonly client: ApiClient;
  state: ViewState;
  detail: SampleDetail | null = null;
  private readonly storage: Pick<Storage, 'getItem' | 'setItem'>;
  private queueEpoch = 0;
  private keyListener: (event: KeyboardEvent) => void;

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.root = root;
    this.client = createClient(options.baseUrl ?? '', options.fetchFn ?? fetch);
    this.storage = options.storage ?? window.localStorage;
    this.state = initialState(this.storage.getItem(REVIEWER_KEY) ?? 'reviewer');
    this.keyListener = (event) => this.onKey(event);
    document.addEventListener('keydown', this.keyListener);
  }

  dispose(): void {
    document.removeEventListener('keydown', this.keyListener);
  }

  async start(): Promise<void> {
    await this.refreshQueue();
  }

  async refreshQueue(): Promise<void> {
    const epoch = ++this.queueEpoch;
    try {
      const page = await this.client.fetchQueue();
      if (epoch !== this.queueEpoch) return; // superseded
      this.state = withQueue(this.state, page.items, page.cursor);
      await this.loadCurrent();
    } catch (error) {
      this.state = { ...this.state, banner: describe(error) };
      this.render();
    }
  }

  async loadCurrent(): Promise<void> {
    if (!this.state.currentId) {
      this.detail = null;
      this.render();
      return;
    }
    try {
      this.detail = await this.client.fetchSample(this.state.currentId);
      this.state = { ...this.state, banner: null };
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.detail = null;
        this.state = { ...this.state, hint: `sample not found` };
      } else {
        this.state = { ...this.state, banner: describe(error) };
      }
    }
    this.render();
  }

  async select(id: string): Promise<void> {
    this.state = {
      ...this.state,
      currentId: id,
      hint: null,
      draft: { ...this.state.draft, verdict: null, failureMode: null },
    };
    await this.loadCurrent();
  }

  setReviewer(name: string): void {
    this.storage.setItem(REVIEWER_KEY, name);
    this.state = { ...this.state, draft: { ...this.state.draft, reviewer: name } };
  }

  async onKey(event: KeyboardEvent): Promise<void> {
    const target = event.target as HTMLElement | null;
    if (target && ['INPUT', 'TEXTAREA', 'SELECT'].includes(target.tagName)) {
      return;
    }
    const action = keyToAction(this.state, event.key);
    if (action.kind === 'none') return;
    event.preventDefault();
    switch (action.kind) {
      case 'submit':
        await this.submit(action.verdict, action.failureMode);
        break;
      case 'draft-reject':
        this.state = {
          ...this.state,
          draft: { ...this.state.draft, verdict: 'reject', failureMode: null },
          hint: validateDraft({ ...this.state.draft, verdict: 'reject' }),
        };
        this.render();
        break;
      case 'pick-failure-mode':
        await this.submit('reject', action.failureMode);
        break;
      case 'cancel':
        this.state = {
          ...this.state,
          draft: { ...this.state.draft, verdict: null, failureMode: null },
          hint: null,
        };
        this.render();
        break;
      case 'navigate': {
        const id = neighborId(this.state, action.direction);
        if (id) await this.select(id);
        break;
      }
    }
  }

  async submit(verdict: Verdict, failureMode: FailureMode | null): Promise<void> {
    const id = this.state.currentId;
    if (this.state.submitting || !id) return;
    const draft = { ...this.state.draft, verdict, failureMode };
    const problem = validateDraft(draft);
    if (problem) {
      this.state = { ...this.state, hint: problem };
      this.render();
      return;
    }
    this.state = { ...this.state, submitting: true };
    this.render();
    try {
      await this.client.postDecision(id, verdict, draft.reviewer, failureMode);
      const page = await this.client.fetchQueue();
      this.state = withQueue(
        { ...this.state, submitting: false, hint: null },
        page.items,
        page.cursor,
      );
      this.state = {
        ...this.state,
        draft: { ...this.state.draft, verdict: null, failureMode: null },
      };
      const next = nextPendingId({ ...this.state, currentId: id });
      this.state = { ...this.state, currentId: next ?? id };
      await this.loadCurrent();
    } catch (error) {
      const hint =
        error instanceof ApiError && error.status === 409
          ? `rejected by server: ${error.detail}`
          : null;
      this.state = {
        ...this.state,
        submitting: false,
        hint,
        banner: hint ? null : describe(error),
      };
      this.render();
    }
  }

  render(): void {
    const { state, detail } = this;
    const counts = { pending: 0, accepted: 0, rejected: 0, flagged: 0 };
    for (const item of state.items) counts[item.status] += 1;

    this.root.innerHTML = `
      <header class="bar">
        <strong>annotation review</strong>
        <span class="counts">
          pending ${counts.pending} · accepted ${counts.accepted} ·
          rejected ${counts.rejected} · flagged ${counts.flagged}
        </span>
        <label>reviewer
          <input id="reviewer" value="${escapeHtml(state.draft.reviewer)}" />
        </label>
      </header>
      ${state.banner ? `<div class="banner" role="alert">${escapeHtml(state.banner)} <button id="retry">retry</button></div>` : ''}
      <main class="layout">
        <nav class="queue" aria-label="sample queue">
          ${state.items
            .map(
              (item) => `
            <button class="row ${item.id === state.currentId ? 'active' : ''}"
                    data-id="${escapeHtml(item.id)}">
              <span class="chip ${item.status}">${item.status}</span>
              <span class="iid">${escapeHtml(item.id)}</span>
              <span class="instruction">${escapeHtml(item.instruction)}</span>
            </button>`,
            )
            .join('')}
        </nav>
        <section class="detail">
          ${detail ? renderDetail(detail) : '<p class="empty">no sample selected</p>'}
          ${renderDecisionPanel(this)}
        </section>
      </main>
      <footer class="help">
        keys: <kbd>a</kbd> accept · <kbd>r</kbd> reject (then <kbd>1</kbd>-<kbd>5</kbd> failure mode)
        · <kbd>f</kbd> flag · <kbd>j</kbd>/<kbd>k</kbd> move · <kbd>Esc</kbd> cancel
      </footer>`;

    this.root.querySelectorAll<HTMLButtonElement>('.row').forEach((button) => {
      button.addEventListener('click', () => void this.select(button.dataset.id!));
    });
    const reviewer = this.root.querySelector<HTMLInputElement>('#reviewer');
    reviewer?.addEventListener('change', () => this.setReviewer(reviewer.value));
    const retry = this.root.querySelector<HTMLButtonElement>('#retry');
    retry?.addEventListener('click', () => void this.refreshQueue());
    this.root
      .querySelectorAll<HTMLButtonElement>('[data-verdict]')
      .forEach((button) => {
        button.addEventListener('click', () => {
          const verdict = button.dataset.verdict as Verdict;
          if (verdict === 'reject') {
            void this.onKey(new KeyboardEvent('keydown', { key: 'r' }));
          } else {
            void this.submit(verdict, null);
          }
        });
      });
    this.root
      .querySelectorAll<HTMLButtonElement>('[data-failure-mode]')
      .forEach((button) => {
        button.addEventListener('click', () =>
          void this.submit('reject', button.dataset.failureMode as FailureMode),
        );
      });
  }
}

function renderDetail(detail: SampleDetail): string {
  const provenance = detail.provenance
    ? `<dl class="provenance">${Object.entries(detail.provenance)
        .filter(([key]) => key !== 'clip_id' && key !== 'sample_id')
        .map(
          ([key, value]) =>
            `<dt>${escapeHtml(key)}</dt><dd>${escapeHtml(String(value))}</dd>`,
        )
        .join('')}</dl>`
    : '';
  return `
    <h2>${escapeHtml(detail.id)} <span class="chip ${detail.status}">${detail.status}</span></h2>
    <p class="instruction-line">“${escapeHtml(detail.instruction)}”
      <span class="source">(${escapeHtml(detail.source)})</span></p>
    <img class="preview" alt="sample ${escapeHtml(detail.id)}"
         src="${escapeHtml(detail.overlay_url ?? detail.image_url)}" />
    ${
      detail.direction_label
        ? `<p class="direction">motion direction: <code>${escapeHtml(detail.direction_label)}</code></p>`
        : '<p class="direction muted">no motion direction annotated</p>'
    }
    ${provenance}`;
}

function renderDecisionPanel(app: ReviewApp): string {
  const { draft, hint, submitting } = app.state;
  const rejecting = draft.verdict === 'reject';
  return `
    <div class="decision">
      <button data-verdict="accept" ${submitting ? 'disabled' : ''}>accept (a)</button>
      <button data-verdict="reject" ${submitting ? 'disabled' : ''}>reject (r)</button>
      <button data-verdict="flag" ${submitting ? 'disabled' : ''}>flag (f)</button>
      ${
        rejecting
          ? `<div class="failure-modes">
              ${FAILURE_MODES.map(
                (mode, index) =>
                  `<button data-failure-mode="${mode}">${index + 1}: ${mode}</button>`,
              ).join('')}
            </div>`
          : ''
      }
      ${hint ? `<p class="hint">${escapeHtml(hint)}</p>` : ''}
    </div>`;
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function initApp(root: HTMLElement, options: AppOptions = {}): ReviewApp {
  return new ReviewApp(root, options);
}
